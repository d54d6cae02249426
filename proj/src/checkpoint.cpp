#include "afs/checkpoint.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "afs/csv.hpp"
#include "afs/error.hpp"

namespace afs {

namespace {

constexpr char kMagic[4] = {'A', 'F', 'S', 'C'};

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32(const std::string& b, std::size_t& off, const std::string& what,
                      const std::string& origin) {
    if (off + 4 > b.size())
        fail_data("corrupt checkpoint blob: truncated " + what + " in " + origin);
    const auto* p = reinterpret_cast<const unsigned char*>(b.data() + off);
    off += 4;
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

float get_f32(const std::string& b, std::size_t& off, const std::string& origin) {
    const std::uint32_t bits = get_u32(b, off, "values", origin);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

double manifest_num(const CheckpointFile& f, const std::string& key) {
    const std::string v = f.manifest_value(key);
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        fail_data("checkpoint: manifest key '" + key + "' is not numeric: '" + v + "'");
    }
}

std::int64_t manifest_int(const CheckpointFile& f, const std::string& key) {
    const std::string v = f.manifest_value(key);
    try {
        return std::stoll(v);
    } catch (const std::exception&) {
        fail_data("checkpoint: manifest key '" + key + "' is not an integer: '" + v + "'");
    }
}

CheckpointFile::Blob tensor_blob(const std::string& name, const Tensor& t) {
    CheckpointFile::Blob b;
    b.name = name;
    b.shape = t.shape();
    b.values.reserve(t.data().size());
    for (double v : t.data()) b.values.push_back(static_cast<float>(v));
    return b;
}

Tensor blob_tensor(const CheckpointFile::Blob& b, bool requires_grad) {
    std::vector<double> vals(b.values.begin(), b.values.end());
    return Tensor::from(b.shape, std::move(vals), requires_grad);
}

const CheckpointFile::Blob& find_blob(const CheckpointFile& f, const std::string& name) {
    for (const auto& b : f.blobs)
        if (b.name == name) return b;
    fail_data("checkpoint: missing parameter blob '" + name + "'");
}

}  // namespace

std::string CheckpointFile::manifest_value(const std::string& key) const {
    for (const auto& [k, v] : manifest)
        if (k == key) return v;
    fail_data("checkpoint: missing manifest key '" + key + "'");
}

bool CheckpointFile::has_key(const std::string& key) const {
    for (const auto& [k, v] : manifest)
        if (k == key) return true;
    return false;
}

std::string CheckpointFile::serialize() const {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    std::string mtext;
    for (const auto& [k, v] : manifest) mtext += k + "=" + v + "\n";
    put_u32(out, static_cast<std::uint32_t>(mtext.size()));
    out += mtext;
    for (const auto& b : blobs) {
        put_u32(out, static_cast<std::uint32_t>(b.name.size()));
        out += b.name;
        put_u32(out, static_cast<std::uint32_t>(b.shape.size()));
        std::size_t count = 1;
        for (auto e : b.shape) {
            put_u32(out, static_cast<std::uint32_t>(e));
            count *= static_cast<std::size_t>(e);
        }
        if (count != b.values.size()) fail_data("checkpoint: blob '" + b.name + "' shape/value mismatch");
        for (float f : b.values) put_f32(out, f);
    }
    return out;
}

CheckpointFile CheckpointFile::deserialize(const std::string& bytes, const std::string& origin) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        fail_data("not an AFSC checkpoint: " + origin);
    std::size_t off = 4;
    const std::uint32_t version = get_u32(bytes, off, "version", origin);
    if (version != kVersion)
        fail_data("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kVersion) + ") in " + origin);

    CheckpointFile f;
    const std::uint32_t mlen = get_u32(bytes, off, "manifest length", origin);
    if (off + mlen > bytes.size()) fail_data("corrupt checkpoint: truncated manifest in " + origin);
    std::istringstream mtext(bytes.substr(off, mlen));
    off += mlen;
    std::string line;
    while (std::getline(mtext, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail_data("corrupt checkpoint: manifest line without '=' in " + origin);
        f.manifest.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }

    while (off < bytes.size()) {
        Blob b;
        const std::uint32_t name_len = get_u32(bytes, off, "blob name length", origin);
        if (name_len > (1u << 20) || off + name_len > bytes.size())
            fail_data("corrupt checkpoint blob: bad name length in " + origin);
        b.name = bytes.substr(off, name_len);
        off += name_len;
        const std::uint32_t rank = get_u32(bytes, off, "blob rank", origin);
        if (rank == 0 || rank > 8) fail_data("corrupt checkpoint blob: bad rank in " + origin);
        std::size_t count = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            const std::uint32_t e = get_u32(bytes, off, "blob extent", origin);
            if (e == 0) fail_data("corrupt checkpoint blob: zero extent in " + origin);
            b.shape.push_back(static_cast<std::int64_t>(e));
            // No blob can be larger than the file; division form avoids overflow.
            if (count > bytes.size() / e)
                fail_data("corrupt checkpoint blob: extents exceed file size in " + origin);
            count *= e;
        }
        if (off + 4 * count > bytes.size())
            fail_data("corrupt checkpoint blob: truncated values for '" + b.name + "' in " + origin);
        b.values.reserve(count);
        for (std::size_t i = 0; i < count; ++i) b.values.push_back(get_f32(bytes, off, origin));
        f.blobs.push_back(std::move(b));
    }
    return f;
}

void save_checkpoint(const CheckpointFile& file, const std::string& path) {
    write_file_atomic(path, file.serialize());
}

CheckpointFile load_checkpoint(const std::string& path) {
    return CheckpointFile::deserialize(read_file(path), path);
}

void save_extractor(const ExtractorCheckpoint& ckpt, const std::string& path) {
    CheckpointFile f;
    f.manifest.emplace_back("kind", "extractor");
    f.manifest.emplace_back("input_dim", std::to_string(ckpt.net.input_dim()));
    f.manifest.emplace_back("feature_dim", std::to_string(ckpt.net.feature_dim()));
    f.manifest.emplace_back("hidden", std::to_string(ckpt.net.hidden_dim()));
    f.manifest.emplace_back("classes", std::to_string(ckpt.head.classes()));
    f.manifest.emplace_back("budget", fmt_g17(ckpt.budget));
    f.manifest.emplace_back("seed", std::to_string(ckpt.seed));
    f.manifest.emplace_back("metrics.clean", fmt_g17(ckpt.metrics.clean));
    f.manifest.emplace_back("metrics.pgd10", fmt_g17(ckpt.metrics.pgd10));
    f.manifest.emplace_back("metrics.pgd20", fmt_g17(ckpt.metrics.pgd20));
    const auto params = const_cast<ExtractorCheckpoint&>(ckpt).net.parameters();
    for (std::size_t l = 0; l * 2 + 1 < params.size(); ++l) {
        f.blobs.push_back(tensor_blob("w" + std::to_string(l), params[l * 2]));
        f.blobs.push_back(tensor_blob("b" + std::to_string(l), params[l * 2 + 1]));
    }
    f.blobs.push_back(tensor_blob("head.w", ckpt.head.weight));
    f.blobs.push_back(tensor_blob("head.b", ckpt.head.bias));
    save_checkpoint(f, path);
}

ExtractorCheckpoint load_extractor(const std::string& path) {
    const CheckpointFile f = load_checkpoint(path);
    if (f.manifest_value("kind") != "extractor")
        fail_data("checkpoint: expected an extractor checkpoint in " + path);
    ExtractorCheckpoint ckpt;
    ckpt.budget = manifest_num(f, "budget");
    ckpt.seed = static_cast<std::uint64_t>(std::stoull(f.manifest_value("seed")));
    ckpt.metrics.clean = manifest_num(f, "metrics.clean");
    ckpt.metrics.pgd10 = manifest_num(f, "metrics.pgd10");
    ckpt.metrics.pgd20 = manifest_num(f, "metrics.pgd20");

    std::vector<Tensor> weights, biases;
    for (std::size_t l = 0;; ++l) {
        const std::string wn = "w" + std::to_string(l);
        bool found = false;
        for (const auto& b : f.blobs) found |= (b.name == wn);
        if (!found) break;
        weights.push_back(blob_tensor(find_blob(f, wn), /*requires_grad=*/true));
        biases.push_back(blob_tensor(find_blob(f, "b" + std::to_string(l)), /*requires_grad=*/true));
    }
    if (weights.empty()) fail_data("checkpoint: no layer blobs in " + path);
    ckpt.net = make_extractor(manifest_int(f, "input_dim"), manifest_int(f, "feature_dim"),
                              std::move(weights), std::move(biases));
    ckpt.head.weight = blob_tensor(find_blob(f, "head.w"), /*requires_grad=*/true);
    ckpt.head.bias = blob_tensor(find_blob(f, "head.b"), /*requires_grad=*/true);
    if (ckpt.head.feature_dim() != ckpt.net.feature_dim())
        fail_data("checkpoint: head/feature dim mismatch in " + path);
    if (ckpt.head.classes() != manifest_int(f, "classes"))
        fail_data("checkpoint: class count mismatch in " + path);
    return ckpt;
}

void save_merger(const Merger& merger, const std::string& mask, const std::string& path) {
    CheckpointFile f;
    f.manifest.emplace_back("kind", "merger");
    f.manifest.emplace_back("width", std::to_string(merger.weight.shape()[0]));
    f.manifest.emplace_back("classes", std::to_string(merger.weight.shape()[1]));
    f.manifest.emplace_back("alpha", fmt_g17(merger.alpha));
    f.manifest.emplace_back("mask", mask);
    f.blobs.push_back(tensor_blob("w", merger.weight));
    f.blobs.push_back(tensor_blob("b", merger.bias));
    save_checkpoint(f, path);
}

std::pair<Merger, std::string> load_merger(const std::string& path) {
    const CheckpointFile f = load_checkpoint(path);
    if (f.manifest_value("kind") != "merger")
        fail_data("checkpoint: expected a merger checkpoint in " + path);
    Merger m;
    m.weight = blob_tensor(find_blob(f, "w"), /*requires_grad=*/true);
    m.bias = blob_tensor(find_blob(f, "b"), /*requires_grad=*/true);
    m.alpha = manifest_num(f, "alpha");
    if (m.weight.shape()[0] != manifest_int(f, "width") ||
        m.weight.shape()[1] != manifest_int(f, "classes"))
        fail_data("checkpoint: merger blob shape disagrees with manifest in " + path);
    return {std::move(m), f.manifest_value("mask")};
}

void write_bank_manifest(const BankManifest& bank, const std::string& dir,
                         const std::string& manifest_name) {
    bank.validate();
    std::ostringstream m;
    m << "# afs bank manifest\n";
    m << "mask=" << bank.mask_string() << "\n";
    for (const auto& e : bank.entries) {
        if (e.path.empty()) fail_data("bank manifest: entry has no checkpoint path");
        m << "entry=" << e.path << '\t' << fmt_g17(e.budget) << '\t' << fmt_g17(e.metrics.clean)
          << '\t' << fmt_g17(e.metrics.pgd10) << '\t' << fmt_g17(e.metrics.pgd20) << "\n";
    }
    write_file_atomic(dir + "/" + manifest_name, m.str());
}

void save_bank(BankManifest& bank, const std::string& dir, const std::string& manifest_name) {
    bank.validate();
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < bank.entries.size(); ++i) {
        auto& e = bank.entries[i];
        if (e.path.empty()) e.path = "extractor_" + std::to_string(i) + ".afsc";
        save_extractor(*e.ckpt, dir + "/" + e.path);
    }
    write_bank_manifest(bank, dir, manifest_name);
}

BankManifest load_bank(const std::string& dir, const std::string& manifest_name) {
    std::istringstream in(read_file(dir + "/" + manifest_name));
    BankManifest bank;
    std::string mask_bits;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail_data("bank manifest: malformed line " + std::to_string(line_no));
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "mask") {
            mask_bits = value;
        } else if (key == "entry") {
            std::istringstream fields(value);
            BankEntry e;
            std::string budget_s, clean_s, pgd10_s, pgd20_s;
            if (!std::getline(fields, e.path, '\t') || !std::getline(fields, budget_s, '\t') ||
                !std::getline(fields, clean_s, '\t') || !std::getline(fields, pgd10_s, '\t') ||
                !std::getline(fields, pgd20_s))
                fail_data("bank manifest: malformed entry at line " + std::to_string(line_no));
            e.budget = std::stod(budget_s);
            e.metrics.clean = std::stod(clean_s);
            e.metrics.pgd10 = std::stod(pgd10_s);
            e.metrics.pgd20 = std::stod(pgd20_s);
            e.ckpt = std::make_shared<ExtractorCheckpoint>(load_extractor(dir + "/" + e.path));
            if (std::fabs(e.ckpt->budget - e.budget) > 1e-9)
                fail_data("bank manifest: budget disagrees with checkpoint " + e.path);
            bank.entries.push_back(std::move(e));
        } else {
            fail_data("bank manifest: unknown key '" + key + "' at line " + std::to_string(line_no));
        }
    }
    if (bank.entries.empty()) fail_data("bank manifest: no entries in " + dir + "/" + manifest_name);
    bank.mask.assign(bank.entries.size(), 1);
    if (!mask_bits.empty()) bank.set_mask_string(mask_bits);
    bank.validate();
    return bank;
}

}  // namespace afs
