#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rbacchain/contract.hpp"
#include "rbacchain/datastore.hpp"
#include "rbacchain/errors.hpp"
#include "rbacchain/fabric.hpp"

namespace rbacchain::bench {

class BenchError : public Error {
public:
    using Error::Error;
};

struct BenchSpec {
    std::string experiment;  // gas_roles | concurrent_requests | deploy_verify_rights | chain_generation
    std::vector<std::uint64_t> sweep;
    unsigned repetitions = 3;
    std::uint64_t seed = 1;

    /// Throws BenchError on an unknown experiment, empty sweep or < 3 repetitions.
    void validate() const;
};

struct BenchRow {
    std::string experiment;
    std::uint64_t parameter = 0;
    double median = 0;
    double min = 0;
    double max = 0;
    std::string units;

    bool operator==(const BenchRow&) const = default;
};

/// Summarizes samples into a row; throws BenchError on an empty sample.
BenchRow summarize(std::string experiment, std::uint64_t parameter, std::vector<double> samples, std::string units);

/// "1..5", "10000..50000:10000", "100,200,300". A range without a step
/// advances by its start value (or by 1 when it starts at 0 or 1).
std::vector<std::uint64_t> parse_sweep(const std::string& text);

struct TimingOptions {
    unsigned repetitions = 3;
    std::uint64_t seed = 1;
    fabric::LatencyModel latency = fabric::LatencyModel::uniform(1, 5);
    fabric::Millis timeout{30000};
};

/// Deployment gas of the reference contract per role count.
std::vector<BenchRow> bench_gas_roles(const std::vector<std::uint64_t>& role_counts,
                                      const contract::GasSchedule& schedule = contract::GasSchedule::proposed(),
                                      const std::string& experiment = "gas_roles");

/// Wall time to drain N simultaneous end-to-end requests. Throws BenchError
/// naming the stage if any request fails.
std::vector<BenchRow> bench_concurrent_requests(const std::vector<std::uint64_t>& request_counts,
                                                const TimingOptions& options = {});

/// Rows "deploy" and "verify" per rights count. Deployment runs until the
/// contract is on every node; verification is the ACM's round trip to the BAM.
std::vector<BenchRow> bench_deploy_verify_rights(const std::vector<std::uint64_t>& rights_counts,
                                                 const TimingOptions& options = {});

struct ChainGenOptions {
    unsigned repetitions = 3;
    std::uint64_t seed = 1;
    std::uint64_t fixed_nodes = 4;
    std::uint64_t fixed_records = 10000;
};

/// Rows "chain_records" (sweep records at fixed_nodes) and "chain_nodes"
/// (sweep nodes at fixed_records). Time covers mining every record block on
/// the producer and full replication to the other nodes.
std::vector<BenchRow> bench_chain_generation(const std::vector<std::uint64_t>& record_counts,
                                             const std::vector<std::uint64_t>& node_counts,
                                             const ChainGenOptions& options = {});

/// Time for one chain generation run; the final chains are verified.
double chain_generation_ms(std::uint64_t records, std::uint64_t nodes, std::uint64_t seed);

/// Coefficient of determination of the least-squares line through (x, y).
double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y);
bool strictly_increasing(const std::vector<double>& y);

/// Rows of one experiment, in order.
std::vector<BenchRow> select(const std::vector<BenchRow>& rows, const std::string& experiment);
double r2_of(const std::vector<BenchRow>& rows);

std::string to_csv(const std::vector<BenchRow>& rows);
/// Throws BenchError for empty rows (no file is created) and IoError when
/// the path cannot be written.
void emit_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

// --- seeded workloads -----------------------------------------------------

/// Catalog {status, quantity, quality, destination}.
rbac::AttributeCatalog bench_catalog();
std::vector<datastore::DataRecord> generate_corpus(std::size_t count, std::uint64_t seed);
/// One role holding `rights` seeded rights over the bench catalog.
rbac::RbacModel rights_model(std::size_t rights, std::uint64_t seed);

}  // namespace rbacchain::bench
