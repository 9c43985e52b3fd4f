// Command-line front end: every subcommand is a thin composition of library
// calls. Results go to stdout (JSON with --json, a human table otherwise);
// diagnostics go to stderr. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 numerical error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "csg/csg.hpp"

namespace {

using nlohmann::json;

struct GlobalOpts {
    bool as_json = false;
    std::uint64_t seed = 1;
    std::string out;
};

std::vector<std::int64_t> parse_int_list(const std::string& text, std::size_t expect,
                                         const std::string& what) {
    std::vector<std::int64_t> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            values.push_back(std::stoll(item));
        } catch (const std::exception&) {
            throw csg::value_error(what + ": cannot parse '" + item + "' as an integer");
        }
    }
    if (values.size() != expect) {
        throw csg::value_error(what + ": expected " + std::to_string(expect) +
                               " comma-separated integers, got '" + text + "'");
    }
    return values;
}

csg::SliceShape parse_slice_shape(const std::string& text) {
    const auto v = parse_int_list(text, 4, "slice shape");
    return csg::SliceShape{{v[0], v[1], v[2], v[3]}};
}

/// "--csg A,B,C,D:N" names the slice shape and the code size in one token.
std::pair<csg::SliceShape, std::int64_t> parse_csg_token(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw csg::value_error("--csg expects 'S1,S2,S3,S4:NC', got '" + text + "'");
    }
    const csg::SliceShape shape = parse_slice_shape(text.substr(0, colon));
    std::int64_t n_c = 0;
    try {
        n_c = std::stoll(text.substr(colon + 1));
    } catch (const std::exception&) {
        throw csg::value_error("--csg: cannot parse code size in '" + text + "'");
    }
    return {shape, n_c};
}

csg::ArchSpec resolve_arch(const std::string& name) {
    if (name == "resnet20") return csg::resnet_cifar(20);
    if (name == "resnet56") return csg::resnet_cifar(56);
    if (name == "resnet18") return csg::resnet_imagenet(18);
    if (name == "resnet50") return csg::resnet_imagenet(50);
    if (name.rfind("densenet-bc-", 0) == 0) {
        const std::string rest = name.substr(12);
        const auto dash = rest.find('-');
        if (dash != std::string::npos) {
            try {
                const std::int64_t depth = std::stoll(rest.substr(0, dash));
                const std::int64_t growth = std::stoll(rest.substr(dash + 1));
                return csg::densenet_bc(depth, growth, 0.5);
            } catch (const csg::value_error&) {
                throw;
            } catch (const std::exception&) {
                // fall through to the file check
            }
        }
    }
    if (std::filesystem::exists(name)) return csg::load_arch_file(name);
    throw csg::value_error("unknown architecture '" + name +
                           "' (expected resnet20|resnet56|resnet18|resnet50|densenet-bc-L-K or "
                           "a JSON file path)");
}

json grid_to_json(const csg::SliceGrid& grid) {
    return json{{"filter_shape", grid.filter_shape},
                {"slice_shape", grid.slice_shape.dims},
                {"counts", grid.counts}};
}

csg::SliceGrid grid_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw csg::io_error(path + ": cannot open for reading");
    json j;
    try {
        in >> j;
        const auto fs = j.at("filter_shape").get<std::vector<std::int64_t>>();
        const auto ss = j.at("slice_shape").get<std::vector<std::int64_t>>();
        if (fs.size() != 4 || ss.size() != 4) {
            throw csg::io_error(path + ": grid shapes must have four entries");
        }
        return csg::make_grid({fs[0], fs[1], fs[2], fs[3]},
                              csg::SliceShape{{ss[0], ss[1], ss[2], ss[3]}});
    } catch (const json::exception& e) {
        throw csg::io_error(path + ": " + e.what());
    }
}

void write_grid_json(const std::string& path, const csg::SliceGrid& grid) {
    std::ofstream out(path);
    if (!out) throw csg::io_error(path + ": cannot open for writing");
    out << grid_to_json(grid).dump(2) << "\n";
}

void require(bool ok, const std::string& message) {
    if (!ok) throw csg::value_error(message);
}

void emit(const GlobalOpts& g, const json& machine, const std::string& human) {
    if (g.as_json) {
        std::cout << machine.dump(2) << "\n";
    } else {
        std::cout << human;
    }
}

// ---- subcommand handlers ------------------------------------------------

int cmd_count_params(const GlobalOpts& g, const std::string& arch_name,
                     const std::string& csg_token, bool pretrained, bool compress_1x1,
                     bool table1) {
    if (table1) {
        const auto rows = csg::reference_table_rows();
        std::ostringstream human;
        csg::render_reference_table(human, rows);
        emit(g, csg::to_json(rows), human.str());
        return 0;
    }
    require(!arch_name.empty(), "count-params: missing architecture (or use --table1)");
    const csg::ArchSpec spec = resolve_arch(arch_name);

    if (csg_token.empty()) {
        require(!pretrained && !compress_1x1,
                "count-params: --pretrained-csg/--compress-1x1 need --csg");
        const std::int64_t total = csg::count_params(spec);
        std::ostringstream human;
        human << spec.name << "  # param. " << csg::format_with_commas(total) << "\n";
        emit(g, json{{"arch", spec.name}, {"params", total}}, human.str());
        return 0;
    }

    const auto [shape, n_c] = parse_csg_token(csg_token);
    csg::CsgConfig cfg{shape, n_c, pretrained, compress_1x1};
    const csg::ParamBudget budget = csg_budget(spec, cfg);
    for (const std::string& w : budget.warnings) std::cerr << "warning: " << w << "\n";
    std::ostringstream human;
    csg::render_budget_table(human, budget);
    emit(g, csg::to_json(budget), human.str());
    return 0;
}

int cmd_estimate_codesize(const GlobalOpts& g, const std::string& corpus_path,
                          const std::string& slice_shape_text, double target_psnr,
                          double tolerance_db, double cap_db) {
    const std::vector<csg::Tensor4> corpus = csg::read_corpus_file(corpus_path);
    csg::EstimateConfig cfg;
    cfg.slice_shape = csg::SliceShape{{corpus.front().shape()[0], corpus.front().shape()[1],
                                       corpus.front().shape()[2], corpus.front().shape()[3]}};
    if (!slice_shape_text.empty()) {
        const csg::SliceShape requested = parse_slice_shape(slice_shape_text);
        if (!(requested == cfg.slice_shape)) {
            throw csg::shape_error("corpus slices are " +
                                   csg::shape_to_string(cfg.slice_shape.as_shape()) +
                                   ", --slice-shape asked for " +
                                   csg::shape_to_string(requested.as_shape()));
        }
    }
    cfg.target_psnr_db = target_psnr;
    cfg.tolerance_db = tolerance_db;
    cfg.cap_db = cap_db;

    const csg::CodeSizeEstimate est = csg::estimate_code_size(corpus, cfg);
    if (!g.out.empty()) {
        std::ofstream out(g.out);
        if (!out) throw csg::io_error(g.out + ": cannot open for writing");
        csg::write_psnr_report_csv(out, est.report);
    }

    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "slices             %zu\n"
                  "threshold          %.9g\n"
                  "mean PSNR* (dB)    %.4f\n"
                  "mean retained      %.4f\n"
                  "recommended n_c    %lld\n"
                  "n_c (18x rule)     %lld\n",
                  corpus.size(), est.threshold, est.report.mean_psnr_db,
                  est.report.mean_retained, static_cast<long long>(est.recommended_nc),
                  static_cast<long long>(est.nc18));
    emit(g,
         json{{"slices", corpus.size()},
              {"threshold", est.threshold},
              {"mean_psnr_db", est.report.mean_psnr_db},
              {"mean_retained", est.report.mean_retained},
              {"recommended_nc", est.recommended_nc},
              {"nc18", est.nc18}},
         buf);
    return 0;
}

int cmd_slice(const GlobalOpts& g, const std::string& in_path,
              const std::string& slice_shape_text, const std::string& grid_path) {
    require(!g.out.empty(), "slice: missing --out for the corpus file");
    require(!grid_path.empty(), "slice: missing --grid for the grid JSON");
    const csg::Tensor4 filters = csg::read_tensor_file(in_path);
    const csg::SliceShape shape = parse_slice_shape(slice_shape_text);
    auto [grid, slices] = csg::partition(filters, shape);
    csg::write_corpus_file(g.out, slices);
    write_grid_json(grid_path, grid);
    std::ostringstream human;
    human << "sliced " << csg::shape_to_string(filters.shape()) << " into "
          << grid.slice_count() << " slices of " << csg::shape_to_string(shape.as_shape())
          << "\n";
    emit(g, json{{"slices", grid.slice_count()}, {"grid", grid_to_json(grid)}}, human.str());
    return 0;
}

int cmd_reconstruct(const GlobalOpts& g, const std::string& corpus_path,
                    const std::string& grid_path) {
    require(!g.out.empty(), "reconstruct: missing --out for the filter file");
    const csg::SliceGrid grid = grid_from_json_file(grid_path);
    const std::vector<csg::Tensor4> slices = csg::read_corpus_file(corpus_path);
    const csg::Tensor4 filters = csg::reassemble(grid, slices);
    csg::write_tensor_file(g.out, filters);
    std::ostringstream human;
    human << "reassembled " << slices.size() << " slices into "
          << csg::shape_to_string(filters.shape()) << "\n";
    emit(g, json{{"filter_shape", filters.shape()}}, human.str());
    return 0;
}

int cmd_gen_filters(const GlobalOpts& g, const std::string& weights_path,
                    const std::string& codes_path, const std::string& grid_path) {
    require(!g.out.empty(), "gen-filters: missing --out for the filter file");
    const csg::SliceGrid grid = grid_from_json_file(grid_path);
    const csg::CsgMatrix generator = csg::read_csg_file(weights_path, grid.slice_shape);
    const std::vector<csg::CodeVector> codes = csg::read_code_bank_file(codes_path);
    const csg::Tensor4 filters = csg::generate_filterset(generator, codes, grid);
    csg::write_tensor_file(g.out, filters);
    std::ostringstream human;
    human << "generated " << csg::shape_to_string(filters.shape()) << " from "
          << codes.size() << " codes of length " << generator.code_size() << "\n";
    emit(g, json{{"filter_shape", filters.shape()}, {"codes", codes.size()}}, human.str());
    return 0;
}

int cmd_encode(const GlobalOpts& g, const std::string& weights_path, const std::string& in_path,
               const std::string& slice_shape_text, const std::string& grid_path) {
    require(!g.out.empty(), "encode: missing --out for the code bank");
    const csg::SliceShape shape = parse_slice_shape(slice_shape_text);
    const csg::CsgMatrix generator = csg::read_csg_file(weights_path, shape);
    const csg::Tensor4 filters = csg::read_tensor_file(in_path);
    auto [grid, slices] = csg::partition(filters, shape);
    std::vector<csg::CodeVector> codes;
    codes.reserve(slices.size());
    for (const csg::Tensor4& s : slices) codes.push_back(csg::encode_slice(generator, s));
    csg::write_code_bank_file(g.out, codes);
    if (!grid_path.empty()) write_grid_json(grid_path, grid);
    std::ostringstream human;
    human << "encoded " << codes.size() << " slices into codes of length "
          << generator.code_size() << "\n";
    emit(g, json{{"codes", codes.size()}, {"code_size", generator.code_size()}}, human.str());
    return 0;
}

int cmd_init_csg(const GlobalOpts& g, const std::string& slice_shape_text, std::int64_t n_c) {
    require(!g.out.empty(), "init-csg: missing --out for the weight file");
    const csg::SliceShape shape = parse_slice_shape(slice_shape_text);
    const csg::CsgMatrix generator = csg::init_csg(shape, n_c, g.seed);
    csg::write_csg_file(g.out, generator);
    std::ostringstream human;
    human << "initialized generator " << generator.rows() << "x" << generator.code_size()
          << " (seed " << g.seed << ")\n";
    emit(g, json{{"rows", generator.rows()}, {"code_size", generator.code_size()},
                 {"seed", g.seed}},
         human.str());
    return 0;
}

int cmd_train_demo(const GlobalOpts& g, const std::string& variant, bool freeze,
                   const std::string& loss_name, double lr, std::int64_t batch,
                   std::int64_t max_iters, double target_loss,
                   const std::string& data_inputs, const std::string& data_labels) {
    require(variant == "cnn" || variant == "cnn-csg",
            "train-demo: variant must be 'cnn' or 'cnn-csg'");
    require(!freeze || variant == "cnn-csg", "train-demo: --freeze-csg applies to cnn-csg only");
    require(data_inputs.empty() == data_labels.empty(),
            "train-demo: --data-inputs and --data-labels come together");

    csg::TrainConfig cfg;
    cfg.loss = (loss_name == "l2") ? csg::LossKind::l2 : csg::LossKind::cross_entropy;
    require(loss_name == "l2" || loss_name == "cross-entropy",
            "train-demo: --loss must be 'l2' or 'cross-entropy'");
    cfg.learning_rate = lr;
    cfg.batch_size = batch;
    cfg.max_iterations = max_iters;
    cfg.target_loss = target_loss;
    cfg.seed = g.seed;

    const csg::Dataset data = data_inputs.empty()
                                  ? csg::make_separable_dataset(32, 8, 8, g.seed + 1000)
                                  : csg::read_dataset(data_inputs, data_labels);
    const csg::DatasetStats stats = csg::dataset_stats(data);

    csg::ModelWidths widths;  // 8 conv channels over the dataset's geometry
    widths.in_channels = data.inputs.shape()[1];
    widths.height = data.inputs.shape()[2];
    widths.width = data.inputs.shape()[3];
    widths.classes = data.labels.cols();

    csg::LossCurve curve;
    std::int64_t trainable = 0;
    if (variant == "cnn") {
        csg::CnnModel model = csg::build_cnn(widths, g.seed);
        trainable = csg::trainable_parameter_count(model);
        curve = csg::train(model, data, cfg);
    } else {
        csg::CnnCsgModel model = csg::build_cnn_csg(
            widths, csg::SliceShape{{4, widths.in_channels, 3, 3}}, 32, g.seed, freeze);
        trainable = csg::trainable_parameter_count(model);
        curve = csg::train(model, data, cfg);
    }

    if (!g.out.empty()) {
        std::ofstream out(g.out);
        if (!out) throw csg::io_error(g.out + ": cannot open for writing");
        csg::write_loss_curve_csv(out, curve);
    }

    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "variant            %s%s\n"
                  "final loss         %.6g\n"
                  "iterations         %lld\n"
                  "delta              %.6g\n"
                  "trainable params   %lld\n",
                  variant.c_str(), freeze ? " (frozen generator)" : "", curve.final_loss,
                  static_cast<long long>(curve.iterations), stats.delta,
                  static_cast<long long>(trainable));
    emit(g,
         json{{"variant", variant},
              {"freeze_csg", freeze},
              {"initial_loss", curve.initial_loss},
              {"final_loss", curve.final_loss},
              {"iterations", curve.iterations},
              {"delta", stats.delta},
              {"trainable_params", trainable}},
         buf);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convolutional slice generator toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_flag("--json", g.as_json, "emit machine-readable JSON on stdout");
    app.add_option("--seed", g.seed, "seed for every random draw")->capture_default_str();
    app.add_option("--out", g.out, "output path for the command's artifact");

    // count-params
    std::string arch_name, csg_token;
    bool pretrained = false, compress_1x1 = false, table1 = false;
    auto* count = app.add_subcommand("count-params", "parameter budgets for an architecture");
    count->fallthrough();
    count->add_option("arch", arch_name, "resnet20|resnet56|resnet18|resnet50|densenet-bc-L-K "
                                         "or an architecture JSON file");
    count->add_option("--csg", csg_token, "slice shape and code size, e.g. 16,16,3,3:128");
    count->add_flag("--pretrained-csg", pretrained, "generator is frozen (not trainable)");
    count->add_flag("--compress-1x1", compress_1x1, "also slice-generate 1x1 kernels");
    count->add_flag("--table1", table1, "recompute the published parameter-count tables");

    // estimate-codesize
    std::string corpus_path, est_slice_shape;
    double target_psnr = 20.0, tolerance_db = 0.1, cap_db = 100.0;
    auto* est = app.add_subcommand("estimate-codesize",
                                   "code-size recommendation from corpus compressibility");
    est->fallthrough();
    est->add_option("--corpus", corpus_path, "rank-5 slice corpus file")->required();
    est->add_option("--slice-shape", est_slice_shape, "expected slice shape (validation only)");
    est->add_option("--target-psnr", target_psnr, "target mean PSNR* in dB")
        ->capture_default_str();
    est->add_option("--tolerance-db", tolerance_db, "threshold search tolerance in dB")
        ->capture_default_str();
    est->add_option("--cap-db", cap_db, "PSNR* cap in dB")->capture_default_str();

    // slice
    std::string slice_in, slice_shape_text, slice_grid;
    auto* slice = app.add_subcommand("slice", "partition a filter file into a slice corpus");
    slice->fallthrough();
    slice->add_option("--in", slice_in, "rank-4 filter tensor file")->required();
    slice->add_option("--slice-shape", slice_shape_text, "slice shape S1,S2,S3,S4")->required();
    slice->add_option("--grid", slice_grid, "output path for the grid JSON")->required();

    // reconstruct
    std::string rec_corpus, rec_grid;
    auto* rec = app.add_subcommand("reconstruct", "reassemble filters from a slice corpus");
    rec->fallthrough();
    rec->add_option("--corpus", rec_corpus, "rank-5 slice corpus file")->required();
    rec->add_option("--grid", rec_grid, "grid JSON from 'slice'")->required();

    // gen-filters
    std::string gen_weights, gen_codes, gen_grid;
    auto* gen = app.add_subcommand("gen-filters", "generate filters from codes and a generator");
    gen->fallthrough();
    gen->add_option("--weights", gen_weights, "generator weight file")->required();
    gen->add_option("--codes", gen_codes, "code bank file")->required();
    gen->add_option("--grid", gen_grid, "grid JSON")->required();

    // encode
    std::string enc_weights, enc_in, enc_slice_shape, enc_grid;
    auto* enc = app.add_subcommand("encode", "least-squares codes for an existing filter file");
    enc->fallthrough();
    enc->add_option("--weights", enc_weights, "generator weight file")->required();
    enc->add_option("--in", enc_in, "rank-4 filter tensor file")->required();
    enc->add_option("--slice-shape", enc_slice_shape, "slice shape S1,S2,S3,S4")->required();
    enc->add_option("--grid", enc_grid, "optional output path for the grid JSON");

    // init-csg
    std::string init_slice_shape;
    std::int64_t init_nc = 0;
    auto* init = app.add_subcommand("init-csg", "write a freshly initialized generator");
    init->fallthrough();
    init->add_option("--slice-shape", init_slice_shape, "slice shape S1,S2,S3,S4")->required();
    init->add_option("--nc", init_nc, "code size")->required();

    // train-demo
    std::string variant, loss_name = "cross-entropy", data_inputs, data_labels;
    bool freeze = false;
    double lr = 0.05, target_loss = 0.01;
    std::int64_t batch = 8, max_iters = 5000;
    auto* demo = app.add_subcommand("train-demo", "train the toy network and report the curve");
    demo->fallthrough();
    demo->add_option("variant", variant, "cnn or cnn-csg")->required();
    demo->add_flag("--freeze-csg", freeze, "freeze the generator weights");
    demo->add_option("--loss", loss_name, "l2 or cross-entropy")->capture_default_str();
    demo->add_option("--lr", lr, "learning rate")->capture_default_str();
    demo->add_option("--batch", batch, "batch size")->capture_default_str();
    demo->add_option("--max-iters", max_iters, "iteration cap")->capture_default_str();
    demo->add_option("--target-loss", target_loss, "stop at this training loss")
        ->capture_default_str();
    demo->add_option("--data-inputs", data_inputs,
                     "rank-4 (n, channels, h, w) tensor file instead of the generated set");
    demo->add_option("--data-labels", data_labels, "rank-4 (n, labels, 1, 1) tensor file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (count->parsed()) {
            return cmd_count_params(g, arch_name, csg_token, pretrained, compress_1x1, table1);
        }
        if (est->parsed()) {
            return cmd_estimate_codesize(g, corpus_path, est_slice_shape, target_psnr,
                                         tolerance_db, cap_db);
        }
        if (slice->parsed()) return cmd_slice(g, slice_in, slice_shape_text, slice_grid);
        if (rec->parsed()) return cmd_reconstruct(g, rec_corpus, rec_grid);
        if (gen->parsed()) return cmd_gen_filters(g, gen_weights, gen_codes, gen_grid);
        if (enc->parsed()) return cmd_encode(g, enc_weights, enc_in, enc_slice_shape, enc_grid);
        if (init->parsed()) return cmd_init_csg(g, init_slice_shape, init_nc);
        if (demo->parsed()) {
            return cmd_train_demo(g, variant, freeze, loss_name, lr, batch, max_iters,
                                  target_loss, data_inputs, data_labels);
        }
    } catch (const csg::value_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const csg::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const csg::shape_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const csg::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
