#pragma once

#include "airwrite/error.hpp"
#include "airwrite/tensor/value.hpp"
#include "airwrite/tensor/ops.hpp"
#include "airwrite/tensor/parameters.hpp"
#include "airwrite/tensor/grad_check.hpp"
#include "airwrite/trajectory/trajectory.hpp"
#include "airwrite/trajectory/features.hpp"
#include "airwrite/trajectory/synth.hpp"
#include "airwrite/trajectory/io.hpp"
#include "airwrite/model/config.hpp"
#include "airwrite/model/model.hpp"
#include "airwrite/model/dataset.hpp"
#include "airwrite/ctc/ctc.hpp"
#include "airwrite/metrics/edit_distance.hpp"
#include "airwrite/metrics/evaluate.hpp"
#include "airwrite/training/optimizer.hpp"
#include "airwrite/training/checkpoint.hpp"
#include "airwrite/training/trainer.hpp"
#include "airwrite/model/recognize.hpp"
#include "airwrite/service/service.hpp"
