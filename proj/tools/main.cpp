#include <iostream>

#include "locagent/cli.hpp"

int main(int argc, char** argv) { return locagent::run_cli(argc, argv, std::cout, std::cerr); }
