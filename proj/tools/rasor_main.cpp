#include "rasor/cli.hpp"

int main(int argc, char** argv) { return rasor::cli_main(argc, argv); }
