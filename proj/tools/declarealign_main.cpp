#include <iostream>

#include "declarealign/cli.hpp"

int main(int argc, char** argv) {
    return declarealign::run_cli(argc, argv, std::cout, std::cerr);
}
