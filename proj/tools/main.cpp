#include "plumekit/cli.hpp"

int main(int argc, char** argv) { return plumekit::run_cli(argc, argv); }
