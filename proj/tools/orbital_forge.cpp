#include <iostream>

#include "orbital/cli.hpp"

int main(int argc, char** argv) { return orbital::cli::run(argc, argv, std::cout, std::cerr); }
