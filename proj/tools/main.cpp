#include "vvord/cli.hpp"

int main(int argc, char** argv) { return vvord::run_cli({argv + 1, argv + argc}); }
