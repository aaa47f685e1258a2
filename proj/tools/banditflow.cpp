#include "banditflow/cli.hpp"

int main(int argc, char** argv) { return banditflow::run_cli(argc, argv); }
