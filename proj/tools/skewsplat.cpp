// skewsplat command line: fit1d, fit-scene, render, verify.
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O error.

#include "skewsplat/skewsplat.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace skewsplat;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  bool deterministic = false;
  int threads = 1;
  std::string out_dir = "out";
};

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& it : items) {
    std::stringstream ss(it);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(tok);
    }
  }
  return out;
}

Vec3 parse_rgb(const std::string& s) {
  std::stringstream ss(s);
  std::string tok;
  std::vector<double> v;
  while (std::getline(ss, tok, ',')) v.push_back(parse_double(tok, "--background"));
  if (v.size() != 3) throw ConfigError("--background expects r,g,b");
  return Vec3(v[0], v[1], v[2]);
}

KernelMode parse_kernel(const std::string& s) {
  if (s == "skewnormal" || s == "sn") return KernelMode::skew_normal;
  if (s == "gaussian") return KernelMode::gaussian;
  throw ConfigError("unknown kernel mode '" + s + "' (skewnormal|gaussian)");
}

// ---- fit1d ----

struct Fit1DArgs {
  std::vector<std::string> families = {"gaussian", "skewnormal", "halfgaussian"};
  int n_seeds = 1;
  Fit1DConfig cfg;
  bool no_bcd = false;
  int curve_samples = 1024;
};

void add_fit1d(CLI::App& app, Fit1DArgs& a) {
  auto* c = &a.cfg;
  app.add_option("--families", a.families, "Kernel families, comma separated (gaussian, skewnormal, halfgaussian)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--seeds", a.n_seeds, "Number of consecutive seeds starting at --seed")->capture_default_str();
  app.add_option("--components", c->n_components, "Mixture components")->capture_default_str();
  app.add_option("--iters", c->iters, "Adam iterations")->capture_default_str();
  app.add_option("--lr", c->lr, "Adam learning rate for weight, mu, log sigma")->capture_default_str();
  app.add_option("--lr-alpha", c->lr_alpha, "Adam learning rate for the slant")->capture_default_str();
  app.add_flag("--no-bcd", a.no_bcd, "Disable the alternating sigma/alpha schedule");
  app.add_option("--bcd-t-start", c->bcd.t_start, "Warm-up iterations before alternating")->capture_default_str();
  app.add_option("--bcd-cycle", c->bcd.cycle_len, "Cycle length")->capture_default_str();
  app.add_option("--bcd-base", c->bcd.base_len, "Base steps per cycle")->capture_default_str();
  app.add_flag("--pin-alpha", c->pin_alpha, "Keep the slant at its initial value (0)");
  app.add_flag("--hg-boundary-term", c->hg_boundary_term,
               "Half-Gaussian: add the cut's boundary term to dL/dmu");
  app.add_option("--samples", c->samples, "Target samples on the domain")->capture_default_str();
  app.add_option("--domain-lo", c->domain_lo, "Domain start")->capture_default_str();
  app.add_option("--domain-hi", c->domain_hi, "Domain end")->capture_default_str();
  app.add_option("--period", c->period, "Square wave period")->capture_default_str();
  app.add_option("--duty", c->duty, "Square wave duty cycle")->capture_default_str();
  app.add_option("--low", c->low, "Square wave low level")->capture_default_str();
  app.add_option("--high", c->high, "Square wave high level")->capture_default_str();
  app.add_option("--init-jitter", c->init_jitter, "Seeded jitter of initial means (fraction of spacing)")
      ->capture_default_str();
  app.add_option("--curve-samples", a.curve_samples, "Grid size of curves.csv / curves.svg")->capture_default_str();
}

int run_fit1d(const GlobalOpts& g, Fit1DArgs a) {
  a.cfg.bcd.enabled = !a.no_bcd;
  if (a.n_seeds < 1) throw ConfigError("--seeds must be at least 1");
  std::vector<Family> fams;
  for (const auto& f : split_list(a.families)) fams.push_back(parse_family(f));
  if (fams.empty()) throw ConfigError("no families selected");

  struct Job {
    Family family;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Family f : fams) {
    for (int s = 0; s < a.n_seeds; ++s) jobs.push_back({f, g.seed + static_cast<std::uint64_t>(s)});
  }
  // Validate every configuration before any work or output.
  for (const auto& j : jobs) {
    Fit1DConfig c = a.cfg;
    c.family = j.family;
    c.seed = j.seed;
    c.validate();
  }
  std::vector<FitReport> reports(jobs.size());
  parallel_for(
      jobs.size(), g.threads,
      [&](std::size_t i) {
        Fit1DConfig c = a.cfg;
        c.family = jobs[i].family;
        c.seed = jobs[i].seed;
        reports[i] = fit_mixture_1d(c);
      },
      g.deterministic);

  const fs::path dir = fs::path(g.out_dir);
  CsvWriter summary({"family", "seed", "n_components", "iterations", "initial_mse", "final_mse", "diverged"});
  CsvWriter timing({"family", "seed", "wall_time_s"});
  bool diverged = false;
  for (const auto& r : reports) {
    write_file_atomic(dir / ("report_" + std::string(family_name(r.family)) + "_seed" + std::to_string(r.seed) + ".txt"),
                      format_fit_report(r));
    summary.row({family_name(r.family), std::to_string(r.seed), std::to_string(r.n_components),
                 std::to_string(r.iteration_count), fmt_double(r.initial_mse), fmt_double(r.final_mse),
                 r.diverged ? "1" : "0"});
    timing.row({family_name(r.family), std::to_string(r.seed), fmt_double(r.wall_time)});
    if (r.diverged) {
      diverged = true;
      std::fprintf(stderr, "fit1d: %s diverged (seed %llu)\n", family_name(r.family),
                   static_cast<unsigned long long>(r.seed));
    }
    std::printf("%-13s seed %-4llu final_mse %.6g\n", family_name(r.family),
                static_cast<unsigned long long>(r.seed), r.final_mse);
  }
  summary.save(dir / "summary.csv");
  timing.save(dir / "timings.csv");

  // Curves of the first seed of each family.
  std::vector<double> xs(a.curve_samples), target(a.curve_samples);
  for (int i = 0; i < a.curve_samples; ++i) {
    xs[i] = a.cfg.domain_lo + (a.cfg.domain_hi - a.cfg.domain_lo) * i / std::max(1, a.curve_samples - 1);
    target[i] = square_wave(xs[i], a.cfg.period, a.cfg.duty, a.cfg.low, a.cfg.high);
  }
  std::vector<std::pair<std::string, std::vector<double>>> fits;
  std::vector<std::string> header = {"x", "target"};
  for (std::size_t i = 0; i < reports.size(); i += static_cast<std::size_t>(a.n_seeds)) {
    std::vector<double> ys(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) ys[k] = reports[i].model(xs[k]);
    header.push_back(family_name(reports[i].family));
    fits.emplace_back(family_name(reports[i].family), std::move(ys));
  }
  CsvWriter curves(header);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    std::vector<std::string> row = {fmt_double(xs[k]), fmt_double(target[k])};
    for (const auto& f : fits) row.push_back(fmt_double(f.second[k]));
    curves.row(row);
  }
  curves.save(dir / "curves.csv");
  write_file_atomic(dir / "curves.svg", curves_svg(xs, target, fits));
  return diverged ? 3 : 0;
}

// ---- fit-scene ----

struct SceneArgs {
  std::string cameras;
  std::vector<std::string> targets;
  std::string resume;
  std::string kernel = "skewnormal";
  std::string background = "0,0,0";
  int checkpoint_every = 0;
  bool no_bcd = false;
  int synthetic_views = 3;
  int synthetic_size = 64;
  SceneFitConfig cfg;
};

void add_scene(CLI::App& app, SceneArgs& a) {
  auto& c = a.cfg;
  auto& o = c.optimizer;
  app.add_option("--cameras", a.cameras, "Camera file; omit to fit the synthetic box scene");
  app.add_option("--targets", a.targets, "Target PNGs, one per camera, in file order")->delimiter(',');
  app.add_option("--resume", a.resume, "Checkpoint directory to continue from");
  app.add_option("--checkpoint-every", a.checkpoint_every, "Write a checkpoint every N iterations (0: only at the end)")
      ->capture_default_str();
  app.add_option("--kernel", a.kernel, "skewnormal or gaussian")->capture_default_str();
  app.add_option("--prims", c.n_prims, "Number of primitives")->capture_default_str();
  app.add_option("--iters", c.iters, "Total training iterations (including resumed ones)")->capture_default_str();
  app.add_option("--synthetic-views", a.synthetic_views, "Views of the synthetic scene")->capture_default_str();
  app.add_option("--synthetic-size", a.synthetic_size, "Width and height of synthetic views")->capture_default_str();
  app.add_option("--lambda-ssim", c.lambda_ssim, "Weight of (1 - SSIM) in the loss")->capture_default_str();
  app.add_option("--background", a.background, "Background color r,g,b")->capture_default_str();
  app.add_option("--lr-mu", o.lr_mu, "SGHMC learning rate for positions")->capture_default_str();
  app.add_option("--lr-mu-final", o.lr_mu_final, "Final position learning rate")->capture_default_str();
  app.add_option("--lr-mu-decay-steps", o.lr_mu_decay_steps, "Steps of exponential decay")->capture_default_str();
  app.add_option("--lr-quat", o.lr_quat, "Adam learning rate, rotation")->capture_default_str();
  app.add_option("--lr-log-scale", o.lr_log_scale, "Adam learning rate, log scale")->capture_default_str();
  app.add_option("--lr-skew", o.lr_skew, "Adam learning rate, skew magnitude and direction")->capture_default_str();
  app.add_option("--lr-opacity", o.lr_opacity, "Adam learning rate, opacity")->capture_default_str();
  app.add_option("--lr-color", o.lr_color, "Adam learning rate, color")->capture_default_str();
  app.add_option("--friction", o.friction, "SGHMC friction")->capture_default_str();
  app.add_option("--noise", o.noise_scale, "SGHMC noise scale")->capture_default_str();
  app.add_flag("--no-bcd", a.no_bcd, "Disable alternating base/skew updates");
  app.add_option("--bcd-t-start", o.bcd.t_start, "Warm-up iterations")->capture_default_str();
  app.add_option("--bcd-cycle", o.bcd.cycle_len, "Cycle length")->capture_default_str();
  app.add_option("--bcd-base", o.bcd.base_len, "Base steps per cycle")->capture_default_str();
  app.add_option("--init-scale", c.init_scale, "Initial primitive scale")->capture_default_str();
  app.add_option("--init-opacity", c.init_opacity, "Initial opacity")->capture_default_str();
}

void write_checkpoint(const fs::path& dir, const SceneTrainer& tr) {
  write_scene(dir / "scene.txt", tr.scene());
  write_file_atomic(dir / "state.txt", serialize_train_state(tr.state()));
}

int run_fit_scene(const GlobalOpts& g, SceneArgs a) {
  SceneFitConfig cfg = a.cfg;
  cfg.seed = g.seed;
  cfg.kernel = parse_kernel(a.kernel);
  cfg.optimizer.bcd.enabled = !a.no_bcd;
  cfg.optimizer.bcd.validate();
  cfg.render.threads = g.threads;
  cfg.render.deterministic = g.deterministic;
  cfg.render.background = parse_rgb(a.background);
  if (cfg.iters < 0) throw ConfigError("--iters must be non-negative");
  const fs::path dir(g.out_dir);

  std::vector<ViewTarget> views;
  if (a.cameras.empty()) {
    if (!a.targets.empty()) throw ConfigError("--targets requires --cameras");
    views = make_box_targets(a.synthetic_views, a.synthetic_size, a.synthetic_size);
  } else {
    const auto cams = read_cameras(a.cameras);
    const auto paths = split_list(a.targets);
    if (paths.size() != cams.size()) {
      throw ConfigError("got " + std::to_string(paths.size()) + " targets for " + std::to_string(cams.size()) +
                        " cameras");
    }
    for (std::size_t i = 0; i < cams.size(); ++i) {
      Image img = read_png(paths[i]);
      if (img.width != cams[i].width || img.height != cams[i].height) {
        throw ConfigError("target '" + paths[i] + "' is " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + " but its camera is " + std::to_string(cams[i].width) +
                          "x" + std::to_string(cams[i].height));
      }
      views.push_back({cams[i], std::move(img)});
    }
  }

  std::unique_ptr<SceneTrainer> tr;
  if (!a.resume.empty()) {
    const fs::path rd(a.resume);
    auto scene = read_scene(rd / "scene.txt");
    auto state = parse_train_state(read_file(rd / "state.txt"), (rd / "state.txt").string());
    tr = std::make_unique<SceneTrainer>(views, cfg, std::move(scene), std::move(state));
  } else {
    tr = std::make_unique<SceneTrainer>(views, cfg);
  }

  CsvWriter loss({"iter", "loss"});
  while (tr->state().iter < cfg.iters) {
    const auto it = tr->state().iter;
    const double l = tr->step();
    loss.row({std::to_string(it), fmt_double(l)});
    if (a.checkpoint_every > 0 && tr->state().iter % a.checkpoint_every == 0) write_checkpoint(dir / "checkpoint", *tr);
    if (log::enabled(log::Level::info) && it % 100 == 0) log::info("iter " + std::to_string(it) + " loss " + fmt_double(l));
  }
  write_checkpoint(dir / "checkpoint", *tr);

  const auto m = tr->evaluate();
  CsvWriter metrics({"view", "psnr", "ssim"});
  for (std::size_t v = 0; v < m.psnr.size(); ++v) {
    metrics.row({std::to_string(v), fmt_double(m.psnr[v]), fmt_double(m.ssim[v])});
    write_png(dir / ("render_view" + std::to_string(v) + ".png"), tr->render_view(v));
    write_png(dir / ("target_view" + std::to_string(v) + ".png"), views[v].target);
  }
  metrics.row({"mean", fmt_double(m.mean_psnr), fmt_double(m.mean_ssim)});
  metrics.save(dir / "metrics.csv");
  loss.save(dir / "loss.csv");
  write_scene(dir / "scene.txt", tr->scene());
  std::vector<CameraModel> cams;
  for (const auto& v : views) cams.push_back(v.camera);
  write_cameras(dir / "cameras.txt", cams);
  std::printf("fit-scene %s: mean PSNR %.4f dB, mean SSIM %.4f\n", a.kernel.c_str(), m.mean_psnr, m.mean_ssim);
  return 0;
}

// ---- render ----

struct RenderArgs {
  std::string scene;
  std::string cameras;
  std::string kernel = "skewnormal";
  std::string background = "0,0,0";
  int view = -1;
};

void add_render(CLI::App& app, RenderArgs& a) {
  app.add_option("--scene", a.scene, "Scene file")->required();
  app.add_option("--cameras", a.cameras, "Camera file")->required();
  app.add_option("--view", a.view, "Render only this camera index (-1: all)")->capture_default_str();
  app.add_option("--kernel", a.kernel, "skewnormal or gaussian")->capture_default_str();
  app.add_option("--background", a.background, "Background color r,g,b")->capture_default_str();
}

int run_render(const GlobalOpts& g, const RenderArgs& a) {
  // Parse everything first: a bad input leaves no partial output behind.
  const auto scene = read_scene(a.scene);
  const auto cams = read_cameras(a.cameras);
  if (a.view >= static_cast<int>(cams.size())) throw ConfigError("--view out of range");
  RenderOptions ro;
  ro.kernel = parse_kernel(a.kernel);
  ro.background = parse_rgb(a.background);
  ro.threads = g.threads;
  ro.deterministic = g.deterministic;
  std::vector<std::pair<int, Image>> out;
  for (int v = 0; v < static_cast<int>(cams.size()); ++v) {
    if (a.view >= 0 && v != a.view) continue;
    out.emplace_back(v, render(scene, cams[v], ro).color);
  }
  const fs::path dir(g.out_dir);
  for (const auto& [v, img] : out) {
    write_png(dir / ("render_" + std::to_string(v) + ".png"), img);
    write_file_atomic(dir / ("render_" + std::to_string(v) + ".f32"), serialize_float_dump(img));
    std::printf("view %d: %dx%d -> %s\n", v, img.width, img.height,
                (dir / ("render_" + std::to_string(v) + ".png")).string().c_str());
  }
  return 0;
}

// ---- verify ----

struct VerifyArgs {
  std::vector<std::string> suites;
  std::int64_t samples = 0;
};

int run_verify(const GlobalOpts& g, const VerifyArgs& a, bool seed_given) {
  verify::VerifyOptions o;
  o.samples = a.samples;
  o.threads = g.threads;
  if (seed_given) o.seed = g.seed;
  auto names = split_list(a.suites);
  if (names.empty()) names = verify::suite_names();
  for (const auto& n : names) {
    const auto& all = verify::suite_names();
    if (std::find(all.begin(), all.end(), n) == all.end()) throw ConfigError("unknown verify suite '" + n + "'");
  }
  if (o.samples > 0) std::printf("reduced-confidence mode: at most %lld configurations per check\n",
                                 static_cast<long long>(o.samples));
  std::vector<std::string> failed;
  for (const auto& n : names) {
    const auto r = verify::run_suite(n, o);
    std::printf("[%s] %s (%.1fs)\n", r.pass() ? "PASS" : "FAIL", n.c_str(), r.seconds);
    for (const auto& c : r.checks) {
      std::printf("    %-4s %-28s worst %-12.4g tol %-10.3g %s\n", c.pass ? "ok" : "FAIL", c.name.c_str(), c.worst,
                  c.tol, c.note.c_str());
    }
    if (!r.pass()) failed.push_back(n);
  }
  if (!failed.empty()) {
    std::string s;
    for (const auto& f : failed) s += (s.empty() ? "" : ", ") + f;
    std::fprintf(stderr, "verify: failed suites: %s\n", s.c_str());
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skew-Normal splatting: fitting harnesses, renderer and verification suites"};
  app.set_config("--config", "", "TOML/INI configuration file; unknown keys are rejected");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_flag("--deterministic", g.deterministic, "Fixed tile scheduling (results are bit-reproducible either way)");
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();

  Fit1DArgs f1;
  auto* c_fit1d = app.add_subcommand("fit1d", "Fit a 1D square wave with Gaussian, Skew-Normal and Half-Gaussian mixtures");
  add_fit1d(*c_fit1d, f1);
  SceneArgs sc;
  auto* c_scene = app.add_subcommand("fit-scene", "Fit primitives to multi-view targets");
  add_scene(*c_scene, sc);
  RenderArgs rn;
  auto* c_render = app.add_subcommand("render", "Render a scene file through a camera file");
  add_render(*c_render, rn);
  VerifyArgs vf;
  auto* c_verify = app.add_subcommand("verify", "Run the property suites");
  c_verify->add_option("--suites", vf.suites, "Suites: kernel, projection, gradients, optimizer, render")
      ->delimiter(',');
  c_verify->add_option("--samples", vf.samples, "Cap on random configurations per check (reduced confidence)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*c_fit1d) return run_fit1d(g, f1);
    if (*c_scene) return run_fit_scene(g, sc);
    if (*c_render) return run_render(g, rn);
    if (*c_verify) return run_verify(g, vf, seed_opt->count() > 0);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
