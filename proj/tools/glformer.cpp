#include <iostream>

#include "glformer/cli/app.hpp"

int main(int argc, char** argv) { return glformer::cli::run_cli(argc, argv, std::cout, std::cerr); }
