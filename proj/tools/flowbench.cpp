#include "flowbench/cli.hpp"

int main(int argc, char** argv) { return flowbench::run_cli(argc, argv); }
