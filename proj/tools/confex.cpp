#include "confex/cli.hpp"

int main(int argc, char** argv) { return confex::run_cli(argc, argv); }
