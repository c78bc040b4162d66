#include "docie/cli.hpp"

int main(int argc, char** argv) { return docie::cli_main(argc, argv); }
