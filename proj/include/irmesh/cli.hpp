#pragma once

namespace irmesh {

// Entry point behind the irmesh binary: parses argv and dispatches to the
// calibrate/albedo/refine/render/synth/eval subcommands. Returns 0 on
// success and nonzero on any error (bad arguments, failed I/O, failed run).
int run_cli(int argc, const char* const* argv);

}  // namespace irmesh
