#include <iostream>

#include "isfm/cli.hpp"

int main(int argc, char** argv) { return isfm::cli::run_cli(argc, argv, std::cout, std::cerr); }
