#pragma once

#include <cstdint>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "csg/arch.hpp"
#include "csg/budget.hpp"

namespace csg {

/// One row of the published parameter-count tables, recomputed.
///
/// `reconciled` marks rows whose published count this library reproduces
/// exactly. Two published configurations resist reconciliation and stay
/// flagged: the compressed-1x1 DenseNet variant (the published slicing
/// policy for 1x1 kernels is not specified, and no natural policy lands on
/// 904,906) and both ResNet-18 ImageNet rows (the published original count
/// exceeds the standard ResNet-18 inventory by over 4M parameters, so the
/// exact variant is unknown). For those rows `computed` is the
/// nearest-policy count this library produces, printed next to the
/// published value.
struct ReferenceRow {
    std::string label;
    std::int64_t computed = 0;
    std::int64_t published = 0;
    std::string ratio_computed;  // floor-2 rendering vs the computed original
    bool reconciled = true;
    std::string note;
};

inline std::vector<ReferenceRow> reference_table_rows() {
    std::vector<ReferenceRow> rows;

    const SliceShape s16{{16, 16, 3, 3}};
    const SliceShape s12{{12, 12, 3, 3}};

    auto add_original = [&rows](const std::string& label, std::int64_t computed,
                                std::int64_t published, const std::string& note = "") {
        ReferenceRow r;
        r.label = label;
        r.computed = computed;
        r.published = published;
        r.ratio_computed = "1.00";
        r.reconciled = (computed == published);
        r.note = note;
        rows.push_back(r);
    };
    auto add_csg = [&rows](const std::string& label, std::int64_t original,
                           const ParamBudget& b, std::int64_t published,
                           const std::string& note = "") {
        ReferenceRow r;
        r.label = label;
        r.computed = b.csg_total;
        r.published = published;
        r.ratio_computed = ratio_floor2(original, b.csg_total);
        r.reconciled = (b.csg_total == published);
        r.note = note;
        rows.push_back(r);
    };

    {
        const ArchSpec d48 = densenet_bc(40, 48, 0.5);
        const std::int64_t total = count_params(d48);
        add_original("DenseNet-BC-40-48 (Original)", total, 2733130);
        add_csg("DenseNet-BC-40-48-CSG-[12,12,3,3]-72", total,
                csg_budget(d48, CsgConfig{s12, 72}), 1416394);
        add_csg("  w/ Pre-trained CSG on DenseNet-BC-40-48", total,
                csg_budget(d48, CsgConfig{s12, 72, /*pretrained=*/true}), 1323082);
        add_csg("  w/ Pre-trained CSG on DenseNet-BC-40-36", total,
                csg_budget(d48, CsgConfig{s12, 72, /*pretrained=*/true}), 1323082);
        add_csg("  w/ Compressed 1x1 Kernels", total,
                csg_budget(d48, CsgConfig{s12, 72, false, /*compress_1x1=*/true}), 904906,
                "unreconciled: published 1x1 slicing policy unknown; computed uses "
                "(12,12,1,1) slices with 8-element codes");
    }
    {
        const ArchSpec d36 = densenet_bc(40, 36, 0.5);
        const std::int64_t total = count_params(d36);
        add_original("DenseNet-BC-40-36 (Original)", total, 1542682);
        add_csg("DenseNet-BC-40-36-CSG-[12,12,3,3]-72", total,
                csg_budget(d36, CsgConfig{s12, 72}), 842842);
        add_csg("  w/ Pre-trained CSG on DenseNet-BC-40-48", total,
                csg_budget(d36, CsgConfig{s12, 72, /*pretrained=*/true}), 749530);
    }
    {
        const ArchSpec r56 = resnet_cifar(56);
        const std::int64_t total = count_params(r56);
        add_original("ResNet-56 (Original)", total, 853018);
        add_csg("ResNet-56-CSG-[16,16,3,3]-128", total, csg_budget(r56, CsgConfig{s16, 128}),
                347162);
        add_csg("ResNet-56-CSG-[12,12,3,3]-72", total, csg_budget(r56, CsgConfig{s12, 72}),
                160450);
        add_csg("  w/ Pre-trained CSG on ResNet-20", total,
                csg_budget(r56, CsgConfig{s16, 128, /*pretrained=*/true}), 52250);
    }
    {
        const ArchSpec r18 = resnet_imagenet(18);
        const std::int64_t total = count_params(r18);
        add_original("ResNet-18 (Original)", total, 15995176,
                     "unreconciled: published count does not match the standard "
                     "ResNet-18 inventory; computed is the standard variant");
        add_csg("ResNet-18-CSG-[16,16,3,3]-128", total, csg_budget(r18, CsgConfig{s16, 128}),
                10371368,
                "unreconciled: depends on the unknown ResNet-18 variant; computed "
                "applies the policy to the standard variant");
    }
    {
        const ArchSpec r50 = resnet_imagenet(50);
        const std::int64_t total = count_params(r50);
        add_original("ResNet-50 (Original)", total, 25557032);
        add_csg("ResNet-50-CSG-[16,16,3,3]-128", total, csg_budget(r50, CsgConfig{s16, 128}),
                15163432);
    }
    return rows;
}

inline nlohmann::json to_json(const std::vector<ReferenceRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ReferenceRow& r : rows) {
        nlohmann::json j = {{"label", r.label},
                            {"computed", r.computed},
                            {"published", r.published},
                            {"ratio", r.ratio_computed},
                            {"reconciled", r.reconciled}};
        if (!r.note.empty()) j["note"] = r.note;
        arr.push_back(j);
    }
    return arr;
}

inline void render_reference_table(std::ostream& out, const std::vector<ReferenceRow>& rows) {
    out << std::left << std::setw(46) << "Network Architecture" << std::right << std::setw(14)
        << "# Param." << std::setw(14) << "Published" << std::setw(9) << "Ratio"
        << "  Status\n";
    for (const ReferenceRow& r : rows) {
        out << std::left << std::setw(46) << r.label << std::right << std::setw(14)
            << format_with_commas(r.computed) << std::setw(14)
            << format_with_commas(r.published) << std::setw(8) << r.ratio_computed << "x"
            << "  " << (r.reconciled ? "exact" : "UNRECONCILED") << "\n";
        if (!r.note.empty()) out << "    [" << r.note << "]\n";
    }
}

}  // namespace csg
