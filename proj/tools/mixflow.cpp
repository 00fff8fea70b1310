#include <iostream>

#include "mixflow/cli.hpp"

int main(int argc, char** argv) { return mixflow::run_cli(argc, argv, std::cout, std::cerr); }
