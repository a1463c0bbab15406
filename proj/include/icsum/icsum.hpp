#pragma once

// Umbrella header for the intent-specific code comment generation toolkit.

#include "icsum/codetok.hpp"
#include "icsum/corpus.hpp"
#include "icsum/harness.hpp"
#include "icsum/llm.hpp"
#include "icsum/metrics.hpp"
#include "icsum/prompt.hpp"
#include "icsum/rerank.hpp"
#include "icsum/retrieval.hpp"
