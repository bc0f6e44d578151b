#include "biocl/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace biocl {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path, std::size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) {
        throw IdxParseError(path + ": truncated file at byte offset " + std::to_string(offset));
    }
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::vector<unsigned char> read_payload(std::ifstream& in, const std::string& path,
                                        std::size_t offset, std::size_t count) {
    std::vector<unsigned char> bytes(count);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) {
        throw IdxParseError(path + ": truncated payload at byte offset " +
                            std::to_string(offset + static_cast<std::size_t>(in.gcount())));
    }
    return bytes;
}

char hexdigit(unsigned v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

std::string hex32(std::uint32_t v) {
    std::string s = "0x";
    for (int i = 28; i >= 0; i -= 4) s += hexdigit((v >> i) & 0xF);
    return s;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IdxParseError(images_path + ": cannot open");
    const auto img_magic = read_u32_be(img, images_path, 0);
    if (img_magic != kImageMagic) {
        throw IdxParseError(images_path + ": bad magic " + hex32(img_magic) +
                            " at byte offset 0 (expected 0x00000803)");
    }
    const auto n_images = read_u32_be(img, images_path, 4);
    const auto rows = read_u32_be(img, images_path, 8);
    const auto cols = read_u32_be(img, images_path, 12);
    if (rows == 0 || cols == 0) {
        throw IdxParseError(images_path + ": zero image dimensions at byte offset 8");
    }
    const std::size_t pixels = std::size_t(n_images) * rows * cols;
    const auto image_bytes = read_payload(img, images_path, 16, pixels);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IdxParseError(labels_path + ": cannot open");
    const auto lab_magic = read_u32_be(lab, labels_path, 0);
    if (lab_magic != kLabelMagic) {
        throw IdxParseError(labels_path + ": bad magic " + hex32(lab_magic) +
                            " at byte offset 0 (expected 0x00000801)");
    }
    const auto n_labels = read_u32_be(lab, labels_path, 4);
    if (n_labels != n_images) {
        throw IdxParseError(labels_path + ": label count " + std::to_string(n_labels) +
                            " != image count " + std::to_string(n_images));
    }
    const auto label_bytes = read_payload(lab, labels_path, 8, n_labels);

    Dataset ds;
    ds.image_side = static_cast<int>(rows);
    ds.images = Matrix(static_cast<int>(n_images), static_cast<int>(rows * cols));
    auto flat = ds.images.flat();
    for (std::size_t i = 0; i < pixels; ++i) {
        flat[i] = static_cast<real>(image_bytes[i]) / real(255);
    }
    ds.labels.resize(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i) ds.labels[i] = label_bytes[i];
    return ds;
}

std::pair<Dataset, Dataset> load_idx_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    auto pick = [&](std::initializer_list<const char*> names) -> std::string {
        for (const char* n : names) {
            const auto p = fs::path(dir) / n;
            if (fs::exists(p)) return p.string();
        }
        throw IdxParseError(dir + ": missing IDX file (tried " + std::string(*names.begin()) +
                            ")");
    };
    Dataset train = load_idx(pick({"train-images-idx3-ubyte", "train-images.idx3-ubyte"}),
                             pick({"train-labels-idx1-ubyte", "train-labels.idx1-ubyte"}));
    Dataset test = load_idx(pick({"t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"}),
                            pick({"t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"}));
    return {std::move(train), std::move(test)};
}

void rotate_image(std::span<const real> in, std::span<real> out, int side, real angle_deg,
                  bool bilinear) {
    if (angle_deg == real(0)) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    const real rad = angle_deg * real(3.14159265358979323846 / 180.0);
    const real c = std::cos(rad), s = std::sin(rad);
    const real center = (static_cast<real>(side) - real(1)) / real(2);
    auto sample = [&](real y, real x) -> real {
        if (bilinear) {
            const int x0 = static_cast<int>(std::floor(x));
            const int y0 = static_cast<int>(std::floor(y));
            const real fx = x - static_cast<real>(x0);
            const real fy = y - static_cast<real>(y0);
            real acc = 0;
            for (int dy = 0; dy <= 1; ++dy) {
                for (int dx = 0; dx <= 1; ++dx) {
                    const int yy = y0 + dy, xx = x0 + dx;
                    if (yy < 0 || yy >= side || xx < 0 || xx >= side) continue;
                    const real w = (dx ? fx : real(1) - fx) * (dy ? fy : real(1) - fy);
                    acc += w * in[static_cast<std::size_t>(yy) * side + xx];
                }
            }
            return acc;
        }
        const int xx = static_cast<int>(std::lround(x));
        const int yy = static_cast<int>(std::lround(y));
        if (yy < 0 || yy >= side || xx < 0 || xx >= side) return real(0);
        return in[static_cast<std::size_t>(yy) * side + xx];
    };
    for (int r = 0; r < side; ++r) {
        for (int col = 0; col < side; ++col) {
            // Inverse mapping: rotate the output coordinate back into the source.
            const real dx = static_cast<real>(col) - center;
            const real dy = static_cast<real>(r) - center;
            const real sx = c * dx + s * dy + center;
            const real sy = -s * dx + c * dy + center;
            out[static_cast<std::size_t>(r) * side + col] =
                std::clamp(sample(sy, sx), real(0), real(1));
        }
    }
}

std::vector<int> invert_permutation(std::span<const int> perm) {
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    return inv;
}

Dataset apply_task_transform(const Dataset& base, std::span<const int> indices,
                             const TaskSpec& spec, bool bilinear) {
    Dataset out;
    out.image_side = base.image_side;
    out.images = Matrix(static_cast<int>(indices.size()), base.dim());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int src = indices[i];
        out.labels[i] = base.labels[src];
        const real* in = base.images.row(src);
        real* dst = out.images.row(static_cast<int>(i));
        switch (spec.kind) {
            case Scenario::Rotate:
                rotate_image({in, static_cast<std::size_t>(base.dim())},
                             {dst, static_cast<std::size_t>(base.dim())}, base.image_side,
                             spec.angle_deg, bilinear);
                break;
            case Scenario::Permute:
                for (int j = 0; j < base.dim(); ++j) dst[j] = in[spec.permutation[j]];
                break;
            case Scenario::ClassSplit:
                std::copy(in, in + base.dim(), dst);
                break;
        }
    }
    return out;
}

TaskStream::TaskStream(const Dataset& train_base, const Dataset& test_base,
                       const StreamConfig& cfg)
    : train_base_(&train_base), test_base_(&test_base), cfg_(cfg) {
    if (cfg.n_tasks < 1) throw std::invalid_argument("TaskStream: n_tasks must be >= 1");
    int n_classes = 0;
    for (int y : train_base.labels) n_classes = std::max(n_classes, y + 1);
    if (cfg.scenario == Scenario::ClassSplit &&
        cfg.n_tasks * cfg.classes_per_task > n_classes) {
        throw std::invalid_argument("TaskStream: class split exceeds available classes");
    }

    Rng master(cfg.seed);
    for (int t = 0; t < cfg.n_tasks; ++t) {
        TaskSpec spec;
        spec.kind = cfg.scenario;
        spec.task_id = t;
        switch (cfg.scenario) {
            case Scenario::Rotate:
                spec.angle_deg = static_cast<real>(t) * cfg.theta_inc;
                break;
            case Scenario::Permute: {
                // Every task gets a fresh permutation, the first included.
                auto rng = master.substream(Rng::kShuffle).substream(1000 + t);
                spec.permutation = rng.permutation(train_base.dim());
                break;
            }
            case Scenario::ClassSplit:
                for (int c = 0; c < cfg.classes_per_task; ++c) {
                    spec.classes.push_back(t * cfg.classes_per_task + c);
                }
                break;
        }

        std::vector<int> train_pool, test_pool;
        if (cfg.scenario == Scenario::ClassSplit) {
            for (int i = 0; i < train_base.size(); ++i) {
                if (std::find(spec.classes.begin(), spec.classes.end(), train_base.labels[i]) !=
                    spec.classes.end()) {
                    train_pool.push_back(i);
                }
            }
            for (int i = 0; i < test_base.size(); ++i) {
                if (std::find(spec.classes.begin(), spec.classes.end(), test_base.labels[i]) !=
                    spec.classes.end()) {
                    test_pool.push_back(i);
                }
            }
        } else {
            train_pool.resize(train_base.size());
            for (int i = 0; i < train_base.size(); ++i) train_pool[i] = i;
            test_pool.resize(test_base.size());
            for (int i = 0; i < test_base.size(); ++i) test_pool[i] = i;
        }

        // Seeded subset selection keeps streams bit-identical across runs.
        {
            auto rng = master.substream(Rng::kInit).substream(2000 + t);
            rng.shuffle(train_pool);
            if (cfg.train_limit > 0 && cfg.train_limit < static_cast<int>(train_pool.size())) {
                train_pool.resize(cfg.train_limit);
            }
        }
        {
            auto rng = master.substream(Rng::kInit).substream(3000 + t);
            rng.shuffle(test_pool);
            if (cfg.test_limit > 0 && cfg.test_limit < static_cast<int>(test_pool.size())) {
                test_pool.resize(cfg.test_limit);
            }
        }

        specs_.push_back(std::move(spec));
        train_idx_.push_back(std::move(train_pool));
        test_idx_.push_back(std::move(test_pool));
    }
}

Dataset TaskStream::materialize_train(int t) const {
    return apply_task_transform(*train_base_, train_idx_[t], specs_[t], cfg_.bilinear);
}

Dataset TaskStream::materialize_test(int t) const {
    return apply_task_transform(*test_base_, test_idx_[t], specs_[t], cfg_.bilinear);
}

Dataset TaskStream::pooled_train() const {
    std::size_t total = 0;
    for (const auto& idx : train_idx_) total += idx.size();
    Dataset out;
    out.image_side = train_base_->image_side;
    out.images = Matrix(static_cast<int>(total), train_base_->dim());
    out.labels.reserve(total);
    int row = 0;
    for (int t = 0; t < n_tasks(); ++t) {
        Dataset task = materialize_train(t);
        for (int i = 0; i < task.size(); ++i) {
            std::copy(task.images.row(i), task.images.row(i) + task.dim(), out.images.row(row++));
            out.labels.push_back(task.labels[i]);
        }
    }
    return out;
}

}  // namespace biocl
