#include "sapr/train.hpp"

#include "sapr/transfer.hpp"

namespace sapr {

template TrainResult train_model<ViTModel>(ViTModel&, const Dataset&, const TrainOptions&);
template TrainResult train_model<CnnModel>(CnnModel&, const Dataset&, const TrainOptions&);
template TrainResult train_model<MlpModel>(MlpModel&, const Dataset&, const TrainOptions&);

template double classification_accuracy<ViTModel>(const ViTModel&, const Dataset&, std::size_t);
template double classification_accuracy<CnnModel>(const CnnModel&, const Dataset&, std::size_t);
template double classification_accuracy<MlpModel>(const MlpModel&, const Dataset&, std::size_t);

} // namespace sapr
