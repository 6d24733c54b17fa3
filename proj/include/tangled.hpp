#pragma once

#include "tangled/error.hpp"
#include "tangled/events.hpp"
#include "tangled/graph.hpp"
#include "tangled/harness.hpp"
#include "tangled/mallows.hpp"
#include "tangled/permutation.hpp"
#include "tangled/rng.hpp"
#include "tangled/version.hpp"
#include "tangled/width.hpp"
