#pragma once

// Umbrella header for the library (everything except the CLI layer).

#include "harsanyi/analysis.hpp"
#include "harsanyi/core.hpp"
#include "harsanyi/external.hpp"
#include "harsanyi/oracle.hpp"
#include "harsanyi/records.hpp"
#include "harsanyi/table_io.hpp"
#include "harsanyi/transform.hpp"
#include "harsanyi/version.hpp"
