#include "admpo/cli.hpp"

int main(int argc, char** argv) { return admpo::cli_dispatch(argc, argv); }
