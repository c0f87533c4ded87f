#include "simpl/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return simpl::cli_main(argc, argv, std::cout, std::cerr); }
