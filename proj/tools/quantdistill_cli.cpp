// quantdistill command-line front end. Talks to the library only through the
// C interface.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "quantdistill/quantdistill.h"

namespace {

void print_line(const char* message, void*) { std::fprintf(stderr, "%s\n", message); }

int report(qd_status status) {
  if (status != QD_OK) {
    std::fprintf(stderr, "quantdistill: %s: %s\n", qd_status_name(status), qd_last_error());
  }
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-bit quantization of embedding networks with data-free embedding distillation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qd_version());

  std::string config;
  std::string teacher;
  std::vector<int> bits;
  std::vector<std::string> models;

  auto* pretrain = app.add_subcommand("pretrain", "Train the full-precision teacher on labeled synthetic data");
  pretrain->add_option("--config", config, "Experiment config (key = value)")->required();

  auto* distill = app.add_subcommand("distill", "Calibrate, quantize and distill students from a teacher");
  distill->add_option("--config", config, "Experiment config (key = value)")->required();
  distill->add_option("--teacher", teacher, "Teacher model file")->required();
  distill->add_option("--bits", bits, "Bit widths, e.g. 6,8 (defaults to the config)")->delimiter(',');

  auto* eval = app.add_subcommand("eval", "Verification report for one or more model files");
  eval->add_option("--config", config, "Experiment config (key = value)")->required();
  eval->add_option("models", models, "Model files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(QD_ERR_CONFIG);
  }

  if (*pretrain) return report(qd_cmd_pretrain(config.c_str(), print_line, nullptr));
  if (*distill) {
    std::vector<int32_t> widths(bits.begin(), bits.end());
    return report(qd_cmd_distill(config.c_str(), teacher.c_str(), widths.data(), widths.size(), print_line, nullptr));
  }
  std::vector<const char*> paths;
  for (const auto& m : models) paths.push_back(m.c_str());
  return report(qd_cmd_eval(config.c_str(), paths.data(), paths.size(), print_line, nullptr));
}
