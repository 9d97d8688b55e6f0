#include <iostream>

#include "devgan/cli.hpp"

int main(int argc, char** argv) { return devgan::run_cli(argc, argv, std::cout, std::cerr); }
