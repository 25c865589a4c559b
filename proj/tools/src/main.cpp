#include <iostream>

#include "gqme_cli/commands.hpp"

int main(int argc, char** argv) { return gqme::cli::run(argc, argv, std::cout, std::cerr); }
