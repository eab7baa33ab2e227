#include "rdsens/cli.hpp"

int main(int argc, char** argv) { return rdsens::cli::run_main(argc, argv); }
