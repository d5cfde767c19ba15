#include <iostream>

#include "dvoc/cli.hpp"

int main(int argc, char** argv) { return dvoc::run_cli(argc, argv, std::cout, std::cerr); }
