#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "darboux/io.hpp"

// Exit codes: 0 ok, 2 bad arguments, run file or curve table, 3 trace could
// not start, 4 run incomplete or output not writable, 5 unexpected failure
// (including a re-analyzed curve that does not sit on its surface).
int main(int argc, char** argv) {
  CLI::App app{
      "trace and verify constant-angle curves (slant, helix, isophote) on "
      "parametric and implicit surfaces"};
  app.require_subcommand(1);

  std::string input, out_dir, branch, format, surface_cfg;
  double step = 0, s_max = 0, surface_residual = 0;

  CLI::App* cmd_tr = app.add_subcommand("trace", "integrate the requested curves, write tables");
  CLI::App* cmd_an = app.add_subcommand(
      "analyze", "verify curve invariants: trace a run file, or re-check a table with --surface");
  for (CLI::App* cmd : {cmd_tr, cmd_an}) {
    cmd->add_option("input", input,
                    cmd == cmd_tr ? "run description file"
                                  : "run description file, or curve table with --surface")
        ->required();
    cmd->add_option("--out-dir", out_dir, "override the output directory");
    cmd->add_option("--step", step, "override the arc-length step");
    cmd->add_option("--s-max", s_max, "override the trace length");
    cmd->add_option("--branch", branch, "override branch: plus, minus or both");
    cmd->add_option("--format", format, "table format: csv or tsv");
  }
  CLI::Option* o_surface = cmd_an->add_option(
      "--surface", surface_cfg, "surface description file; the input becomes a curve table");
  cmd_an
      ->add_option("--surface-residual", surface_residual,
                   "how far off the surface a re-analyzed curve may sit (default 1e-6)")
      ->needs(o_surface);
  // tracer knobs are meaningless when re-analyzing an existing table
  for (const char* name : {"--step", "--s-max", "--branch", "--format"})
    o_surface->excludes(cmd_an->get_option(name));

  app.add_subcommand("catalog", "list the built-in surfaces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (app.got_subcommand("catalog")) return darboux::cmd_catalog(std::cout);

  CLI::App* got = app.got_subcommand("analyze") ? cmd_an : cmd_tr;
  darboux::RunOverrides ov;
  if (got->count("--out-dir")) ov.out_dir = out_dir;
  if (got->count("--step")) ov.step = step;
  if (got->count("--s-max")) ov.s_max = s_max;
  if (got->count("--branch")) ov.branch = branch;
  if (got->count("--format")) ov.format = format;
  if (got == cmd_an && got->count("--surface")) {
    if (got->count("--surface-residual")) ov.surface_residual = surface_residual;
    return darboux::analyze_curve_command(input, surface_cfg, ov, std::cout, std::cerr);
  }
  return darboux::run_command(got == cmd_an, input, ov, std::cout, std::cerr);
}
