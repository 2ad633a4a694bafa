#include <iostream>

#include "bbdm/cli.hpp"

int main(int argc, char** argv) { return bbdm::run_cli(argc, argv, std::cout, std::cerr); }
