#include "condgreeks/cli.hpp"

int main(int argc, char** argv) {
    return cg::cli_main(argc, argv);
}
