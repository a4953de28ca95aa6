#include <iostream>

#include "nearps/cli.hpp"

int main(int argc, char** argv) { return nearps::cli::run(argc, argv, std::cout, std::cerr); }
