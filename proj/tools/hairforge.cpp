#include "hairforge/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hairforge::cli::run(argc, argv, std::cout, std::cerr); }
