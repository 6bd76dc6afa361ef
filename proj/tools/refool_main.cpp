#include "refool/cli.hpp"

int main(int argc, char** argv) { return refool::cli_main(argc, argv); }
