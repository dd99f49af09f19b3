#include <string>
#include <vector>

#include "hamlearn/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hamlearn::cli::run_cli(args);
}
