#include "lhtes/cli.hpp"

int main(int argc, char** argv) { return lhtes::run_cli(argc, argv); }
