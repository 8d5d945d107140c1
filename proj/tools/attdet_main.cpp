#include "attdet/cli.hpp"

int main(int argc, char** argv) {
    return attdet::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
