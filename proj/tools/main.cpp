#include "mtseq/cli.hpp"

int main(int argc, char** argv) { return mtseq::run_cli(argc, argv); }
