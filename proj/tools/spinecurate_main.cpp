#include "spinecurate/cli.hpp"

int main(int argc, char** argv) { return spinecurate::run_cli(argc, argv); }
