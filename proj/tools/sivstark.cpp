#include <iostream>

#include "sivstark/cli.hpp"

int main(int argc, char** argv) { return sivstark::cli::run_cli(argc, argv, std::cout, std::cerr); }
