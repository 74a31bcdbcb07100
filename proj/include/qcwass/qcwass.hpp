#pragma once

#include "qcwass/error.hpp"
#include "qcwass/measures.hpp"
#include "qcwass/perturb.hpp"
#include "qcwass/project.hpp"
#include "qcwass/smooth.hpp"
#include "qcwass/study.hpp"
#include "qcwass/transport.hpp"
