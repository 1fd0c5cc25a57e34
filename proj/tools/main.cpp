#include <iostream>

#include "rmu/cli.hpp"

int main(int argc, char** argv) { return rmu::run_cli(argc, argv, std::cout, std::cerr); }
