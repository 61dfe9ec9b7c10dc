#include "mlwave/cli.hpp"

int main(int argc, char** argv) { return mlwave::run_cli(argc, argv); }
