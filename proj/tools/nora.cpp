#include <iostream>

#include "nora/cli.hpp"

int main(int argc, char** argv) { return nora::run_cli(argc, argv, std::cout, std::cerr); }
