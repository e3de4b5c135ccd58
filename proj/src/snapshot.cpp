#include <cstring>
#include <fstream>

#include "countycast/errors.hpp"
#include "countycast/hash.hpp"
#include "countycast/ingest.hpp"

namespace countycast {

namespace {

constexpr char kMagic[8] = {'C', 'C', 'S', 'N', 'A', 'P', 'S', 'H'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        bytes_.append(buf, sizeof(T));
    }
    void put_series(const DailySeries& s) {
        put<std::uint64_t>(static_cast<std::uint64_t>(s.size()));
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            std::uint64_t bits;
            const double v = s.values[i];
            std::memcpy(&bits, &v, 8);
            put<std::uint64_t>(bits);
        }
        for (Eigen::Index i = 0; i < s.size(); ++i) put<std::uint8_t>(s.missing[i] ? 1 : 0);
    }
    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > bytes_.size()) throw InputError("snapshot truncated");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    DailySeries get_series(Date start) {
        const auto n = static_cast<Eigen::Index>(get<std::uint64_t>());
        DailySeries s = DailySeries::all_missing(start, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::uint64_t bits = get<std::uint64_t>();
            double v;
            std::memcpy(&v, &bits, 8);
            s.values[i] = v;
        }
        for (Eigen::Index i = 0; i < n; ++i) s.missing[i] = get<std::uint8_t>() != 0;
        return s;
    }
    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    std::string bytes_;
    std::size_t pos_ = 0;
};

} // namespace

void write_snapshot(const CountyPanel& panel, const ConnectednessGraph& graph,
                    const std::string& path) {
    Writer w;
    w.put<std::int64_t>(panel.first.days());
    w.put<std::int64_t>(panel.last.days());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(panel.counties.size()));
    for (const auto& [fips, rec] : panel.counties) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(fips));
        w.put<double>(rec.population);
        for (int k = 0; k < kStaticAttrCount; ++k) {
            std::uint64_t bits;
            const double v = rec.attrs[k];
            std::memcpy(&bits, &v, 8);
            w.put<std::uint64_t>(bits);
        }
        w.put<std::uint8_t>(rec.mobility_imputed ? 1 : 0);
        w.put_series(rec.cumulative_cases);
        w.put_series(rec.new_cases);
        w.put_series(rec.change_in_movement);
        w.put_series(rec.stay_put);
        w.put_series(rec.temp_min);
        w.put_series(rec.temp_max);
    }

    const auto& nodes = graph.nodes();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(nodes.size()));
    for (const Fips f : nodes) w.put<std::uint32_t>(static_cast<std::uint32_t>(f));
    // Upper triangle including the diagonal, in column order.
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> edges;
    const auto& m = graph.matrix();
    for (int c = 0; c < m.outerSize(); ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) {
            if (it.row() <= c) {
                edges.emplace_back(static_cast<std::uint32_t>(it.row()),
                                   static_cast<std::uint32_t>(c), it.value());
            }
        }
    }
    w.put<std::uint64_t>(edges.size());
    for (const auto& [i, j, v] : edges) {
        w.put<std::uint32_t>(i);
        w.put<std::uint32_t>(j);
        w.put<double>(v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write snapshot: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t size = w.bytes().size();
    out.write(reinterpret_cast<const char*>(&size), sizeof(size));
    const std::uint64_t checksum = fnv1a64(w.bytes());
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw InputError("short write on snapshot: " + path);
}

std::pair<CountyPanel, ConnectednessGraph> read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open snapshot: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw InputError("not a snapshot file: " + path);
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (!in || version != kVersion) {
        throw InputError("snapshot version mismatch in " + path + ": found " +
                         std::to_string(version) + ", expected " + std::to_string(kVersion));
    }
    std::uint64_t size = 0, checksum = 0;
    in.read(reinterpret_cast<char*>(&size), sizeof(size));
    in.read(reinterpret_cast<char*>(&checksum), sizeof(checksum));
    if (!in) throw InputError("snapshot truncated: " + path);
    std::string payload(size, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(size));
    if (!in || static_cast<std::uint64_t>(in.gcount()) != size) {
        throw InputError("snapshot truncated: " + path);
    }
    if (fnv1a64(payload) != checksum) {
        throw InputError("snapshot checksum mismatch: " + path);
    }

    Reader r(std::move(payload));
    CountyPanel panel;
    panel.first = Date::from_days(r.get<std::int64_t>());
    panel.last = Date::from_days(r.get<std::int64_t>());
    const std::uint32_t n_counties = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < n_counties; ++k) {
        const Fips fips = static_cast<Fips>(r.get<std::uint32_t>());
        CountyRecord rec;
        rec.population = r.get<double>();
        for (int a = 0; a < kStaticAttrCount; ++a) {
            const std::uint64_t bits = r.get<std::uint64_t>();
            double v;
            std::memcpy(&v, &bits, 8);
            rec.attrs[a] = v;
        }
        rec.mobility_imputed = r.get<std::uint8_t>() != 0;
        rec.cumulative_cases = r.get_series(panel.first);
        rec.new_cases = r.get_series(panel.first);
        rec.change_in_movement = r.get_series(panel.first);
        rec.stay_put = r.get_series(panel.first);
        rec.temp_min = r.get_series(panel.first);
        rec.temp_max = r.get_series(panel.first);
        panel.counties[fips] = std::move(rec);
    }

    const std::uint32_t n_nodes = r.get<std::uint32_t>();
    std::vector<Fips> nodes(n_nodes);
    for (auto& f : nodes) f = static_cast<Fips>(r.get<std::uint32_t>());
    const std::uint64_t n_edges = r.get<std::uint64_t>();
    std::vector<std::tuple<Fips, Fips, double>> edges;
    edges.reserve(n_edges);
    for (std::uint64_t e = 0; e < n_edges; ++e) {
        const auto i = r.get<std::uint32_t>();
        const auto j = r.get<std::uint32_t>();
        const double v = r.get<double>();
        edges.emplace_back(nodes.at(i), nodes.at(j), v);
    }
    if (!r.exhausted()) throw InputError("snapshot has trailing bytes: " + path);
    return {std::move(panel), ConnectednessGraph(std::move(nodes), edges)};
}

} // namespace countycast
