#include <iostream>

#include "verify_cli.hpp"

int main(int argc, char **argv) { return csub::cli::run(argc, argv, std::cout, std::cerr); }
