#pragma once

#include "trikey/builder.hpp"
#include "trikey/corpus.hpp"
#include "trikey/group.hpp"
#include "trikey/index_store.hpp"
#include "trikey/ingest.hpp"
#include "trikey/layout.hpp"
#include "trikey/lexicon.hpp"
#include "trikey/oracle.hpp"
#include "trikey/pipeline.hpp"
#include "trikey/query.hpp"
#include "trikey/types.hpp"
