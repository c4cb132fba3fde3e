#include <iostream>
#include <string>
#include <vector>

#include "idea/cli_app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return idea::cli::run(args, std::cout, std::cerr);
}
