#include <iostream>

#include "srb/cli.hpp"

int main(int argc, char** argv) { return srb::cli::main(argc, argv, std::cout, std::cerr); }
