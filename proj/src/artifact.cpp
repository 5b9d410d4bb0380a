#include "lisa/artifact.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lisa::artifact {

using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'L', 'I', 'S', 'A', 'M', 'D', 'L', '1'};

static_assert(std::endian::native == std::endian::little, "artifact I/O assumes a little-endian host");

struct Array {
    std::string name;
    Index rows;
    Index cols;
    const double* data;
};

void append_u64(std::string& out, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

std::vector<double> to_vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

std::string serialize(const harness::Model& m) {
    const auto& enc = m.encoder;
    const auto& dec = m.decoder;
    std::vector<Array> arrays{
        {"train_windows", enc.train_windows().rows(), enc.train_windows().cols(), enc.train_windows().data()},
        {"eigenvalues", enc.eigenvalues().size(), 1, enc.eigenvalues().data()},
        {"eigenvectors", enc.eigenvectors().rows(), enc.eigenvectors().cols(), enc.eigenvectors().data()},
        {"density", enc.density().size(), 1, enc.density().data()},
        {"decoder_latents", dec.train_latents().rows(), dec.train_latents().cols(), dec.train_latents().data()},
        {"decoder_targets", dec.train_targets().rows(), dec.train_targets().cols(), dec.train_targets().data()},
    };

    json h;
    h["format"] = 1;
    h["window"] = enc.window();
    h["channels"] = enc.channels();
    h["encoder"] = {{"beta", enc.kernel().beta},
                    {"epsilon", enc.kernel().epsilon},
                    {"alpha_density", enc.kernel().alpha_density}};
    h["decoder"] = {{"beta", dec.kernel().beta}, {"epsilon", dec.kernel().epsilon}, {"noise_var", dec.noise_var()}};
    h["provenance"] = {{"seed", enc.provenance().seed}, {"data_hash", enc.provenance().data_hash}};
    h["warnings"] = enc.warnings();
    h["standardizer"] = {{"mean", to_vec(m.stats.mean)}, {"scale", to_vec(m.stats.scale)}, {"flagged", m.stats.flagged}};
    h["log1p"] = m.log1p;
    h["channel_names"] = m.channel_names;
    h["train_hash"] = m.train_hash;
    h["seed"] = m.seed;
    json shapes = json::array();
    for (const auto& a : arrays) shapes.push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}});
    h["arrays"] = shapes;

    const std::string header = h.dump();
    std::string out(kMagic, 8);
    append_u64(out, header.size());
    out += header;
    for (const auto& a : arrays) {
        out.append(reinterpret_cast<const char*>(a.data), static_cast<std::size_t>(a.rows * a.cols) * sizeof(double));
    }
    return out;
}

harness::Model deserialize(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw IoError("not a model artifact (bad magic)");
    }
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + 8, 8);
    if (header_len > bytes.size() - 16) throw IoError("truncated model artifact header");
    json h;
    try {
        h = json::parse(bytes.substr(16, header_len));
    } catch (const json::exception& e) {
        throw IoError(std::string("corrupt model artifact header: ") + e.what());
    }

    try {
        if (h.at("format").get<int>() != 1) throw IoError("unsupported model artifact format");
        std::size_t offset = 16 + header_len;
        std::map<std::string, Matrix> arrays;
        for (const auto& a : h.at("arrays")) {
            const auto rows = a.at("rows").get<Index>();
            const auto cols = a.at("cols").get<Index>();
            if (rows < 0 || cols < 0) throw IoError("negative array shape in model artifact");
            const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
            if (offset + n > bytes.size()) throw IoError("truncated model artifact payload");
            Matrix mat(rows, cols);
            if (n > 0) std::memcpy(mat.data(), bytes.data() + offset, n);
            offset += n;
            arrays[a.at("name").get<std::string>()] = std::move(mat);
        }
        if (offset != bytes.size()) throw IoError("trailing bytes in model artifact");
        auto take = [&arrays](const char* name) -> Matrix& {
            auto it = arrays.find(name);
            if (it == arrays.end()) throw IoError(std::string("model artifact lacks array ") + name);
            return it->second;
        };
        auto column = [](const Matrix& m) -> Vector { return Eigen::Map<const Vector>(m.data(), m.size()); };

        spectral::KernelParams kp;
        kp.beta = h.at("encoder").at("beta").get<double>();
        kp.epsilon = h.at("encoder").at("epsilon").get<double>();
        kp.alpha_density = h.at("encoder").at("alpha_density").get<double>();
        spectral::Provenance prov{h.at("provenance").at("seed").get<std::uint64_t>(),
                                  h.at("provenance").at("data_hash").get<std::uint64_t>()};

        harness::Model m;
        m.encoder = spectral::SpectralModel::from_parts(
            std::move(take("train_windows")), h.at("window").get<Index>(), h.at("channels").get<Index>(), kp,
            column(take("eigenvalues")), std::move(take("eigenvectors")), column(take("density")),
            h.at("warnings").get<std::vector<std::string>>(), prov);

        gplm::LatentKernel lk{h.at("decoder").at("beta").get<double>(), h.at("decoder").at("epsilon").get<double>()};
        m.decoder = gplm::GplmDecoder::fit(std::move(take("decoder_latents")), std::move(take("decoder_targets")), lk,
                                           h.at("decoder").at("noise_var").get<double>());

        const json& st = h.at("standardizer");
        m.stats.mean = from_vec(st.at("mean").get<std::vector<double>>());
        m.stats.scale = from_vec(st.at("scale").get<std::vector<double>>());
        m.stats.flagged = st.at("flagged").get<std::vector<bool>>();
        m.log1p = h.at("log1p").get<bool>();
        m.channel_names = h.at("channel_names").get<std::vector<std::string>>();
        m.train_hash = h.at("train_hash").get<std::uint64_t>();
        m.seed = h.at("seed").get<std::uint64_t>();
        return m;
    } catch (const json::exception& e) {
        throw IoError(std::string("corrupt model artifact header: ") + e.what());
    }
}

void save(const std::filesystem::path& path, const harness::Model& model) {
    const std::string bytes = serialize(model);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + path.string());
}

harness::Model load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open model artifact " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return deserialize(buf.str());
}

}  // namespace lisa::artifact
