#include "dgame/cli.hpp"

int main(int argc, char** argv) { return dgame::cli_run(argc, argv); }
