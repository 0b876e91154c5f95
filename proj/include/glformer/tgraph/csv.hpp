#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "glformer/tgraph/event.hpp"

namespace glformer {

struct IngestOptions {
  // Treat source and destination ids as separate namespaces (JODIE-style
  // user/item files, where user 0 and item 0 are different nodes).
  bool bipartite_ids = false;
};

namespace csv_detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, std::size_t line, const char* what) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(std::string("cannot parse ") + what + " '" + std::string(field) + "'", line);
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

class IdMap {
 public:
  NodeId intern(std::string_view key) {
    auto [it, inserted] = ids_.try_emplace(std::string(key), static_cast<NodeId>(ids_.size()));
    return it->second;
  }
  std::size_t size() const { return ids_.size(); }

 private:
  std::unordered_map<std::string, NodeId> ids_;
};

}  // namespace csv_detail

// Reads `src,dst,timestamp,label,f1,...,fk` rows after a one-line header.
// Events are stably sorted by timestamp, then node ids are compacted to
// 0..n-1 in order of first appearance in that chronological order, so a
// written stream re-ingests to itself.
inline EventStream read_csv(std::istream& in, const IngestOptions& opt = {}) {
  using namespace csv_detail;
  struct Row {
    std::string src;
    std::string dst;
    Event event;
  };

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("missing header line", 1);
  ++lineno;

  std::vector<Row> rows;
  std::optional<std::size_t> feat_dim;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (fields.size() < 4) {
      throw ParseError("expected at least 4 columns, found " + std::to_string(fields.size()), lineno);
    }
    const std::size_t k = fields.size() - 4;
    if (!feat_dim) feat_dim = k;
    if (*feat_dim != k) {
      throw ParseError("ragged feature row: " + std::to_string(k) + " features, expected " + std::to_string(*feat_dim),
                       lineno);
    }

    Row row{std::string(trim(fields[0])), std::string(trim(fields[1])), Event{}};
    if (row.src.empty() || row.dst.empty()) throw ParseError("empty node id", lineno);
    Event& e = row.event;
    e.t = parse_double(fields[2], lineno, "timestamp");
    if (!(e.t >= 0.0) || !std::isfinite(e.t)) {
      throw ValidationError("line " + std::to_string(lineno) + ": negative or non-finite timestamp");
    }
    const auto label = trim(fields[3]);
    if (!label.empty()) e.label = static_cast<int>(parse_double(label, lineno, "label"));
    e.edge_feat.reserve(k);
    for (std::size_t j = 0; j < k; ++j) e.edge_feat.push_back(parse_double(fields[4 + j], lineno, "feature"));
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.event.t < b.event.t; });

  EventStream s;
  IdMap shared;
  IdMap sources;
  IdMap targets;
  s.events.reserve(rows.size());
  for (Row& r : rows) {
    Event& e = r.event;
    if (opt.bipartite_ids) {
      e.src = sources.intern(r.src);
      e.dst = targets.intern(r.dst);
    } else {
      e.src = shared.intern(r.src);
      e.dst = shared.intern(r.dst);
    }
    s.events.push_back(std::move(e));
  }
  if (opt.bipartite_ids) {
    // Destinations are numbered after all sources.
    const auto offset = static_cast<NodeId>(sources.size());
    for (Event& e : s.events) e.dst += offset;
    s.node_count = sources.size() + targets.size();
  } else {
    s.node_count = shared.size();
  }
  s.edge_feat_dim = feat_dim.value_or(0);
  finalize_stream(s);
  return s;
}

inline EventStream ingest_csv(const std::filesystem::path& path, const IngestOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset file: " + path.string());
  return read_csv(in, opt);
}

// Writes the stream in the ingest format with compacted integer ids.
// Doubles use the shortest representation that parses back exactly.
inline void write_csv(const EventStream& s, std::ostream& out) {
  using csv_detail::format_double;
  out << "src,dst,timestamp,label";
  for (std::size_t j = 0; j < s.edge_feat_dim; ++j) out << ",f" << (j + 1);
  out << '\n';
  for (const Event& e : s.events) {
    out << e.src << ',' << e.dst << ',' << format_double(e.t) << ',';
    if (e.label) out << *e.label;
    for (double f : e.edge_feat) out << ',' << format_double(f);
    out << '\n';
  }
}

}  // namespace glformer
