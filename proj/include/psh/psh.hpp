#pragma once

// Convenience umbrella: the whole library.

#include "psh/tensor.hpp"
#include "psh/rng.hpp"
#include "psh/stats.hpp"
#include "psh/channel.hpp"
#include "psh/sharing.hpp"
#include "psh/permute.hpp"
#include "psh/nonlinear.hpp"
#include "psh/split.hpp"
#include "psh/privacy.hpp"
#include "psh/wire.hpp"
#include "psh/expr.hpp"
#include "psh/store.hpp"
#include "psh/transport.hpp"
#include "psh/party.hpp"
#include "psh/tcp.hpp"
#include "psh/coordinator.hpp"
#include "psh/dataset.hpp"
#include "psh/model.hpp"
#include "psh/train.hpp"
#include "psh/report.hpp"
