#include <iostream>

#include "moranq/cli.hpp"

int main(int argc, char** argv) { return moranq::run_cli(argc, argv, std::cout, std::cerr); }
