#include <tubewave/cli.hpp>

int main(int argc, char** argv) { return tubewave::run_cli(argc, argv); }
