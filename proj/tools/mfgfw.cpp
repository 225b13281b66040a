#include <iostream>

#include "mfgfw/cli.hpp"

int main(int argc, char** argv) { return mfgfw::run_cli(argc, argv, std::cout, std::cerr); }
