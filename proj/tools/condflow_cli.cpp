#include <iostream>

#include "condflow/cli/commands.hpp"

int main(int argc, char** argv) {
    return condflow::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
