#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "topoctl/agent.hpp"
#include "topoctl/run.hpp"

namespace topoctl {

// Run summaries as JSON documents. The embedded run configuration is
// complete enough to re-execute the run.
std::string summary_to_json(const RunSummary& summary);
RunSummary summary_from_json(std::string_view text);
void write_summary(const std::string& path, const RunSummary& summary);
RunSummary read_summary(const std::string& path);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(std::string_view text);

/// iteration,phase,compliance,grayness,volume,p,beta,rmin,move
void write_trace_csv(const std::string& path, const std::vector<IterationRecord>& trace);

/// Tidy plot rows (iteration, controller, seed, C, G, p, beta, rmin, move).
/// Tail rows continue the iteration count after the main loop.
std::string tidy_csv_header();
std::string tidy_csv_rows(const RunSummary& summary);

// Flat binary density file: "TOPD", u32 version, u32 nx, ny, nz, then
// element values as little-endian f64 in element order (x fastest).
void write_topd(const std::string& path, const DensityField& field);
DensityField read_topd(const std::string& path);

/// One row per element: i,j,k,value.
void write_density_csv(const std::string& path, const DensityField& field);

// Agent constants as "key = value" lines under a version header.
std::string agent_config_to_text(const AgentConfig& cfg, int version = 0);
AgentConfig agent_config_from_text(std::string_view text);
void write_agent_config(const std::string& path, const AgentConfig& cfg, int version = 0);
AgentConfig read_agent_config(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace topoctl
