pub mod fit;
pub mod interchange;
pub mod melody;
pub mod moraic;
pub mod phonology;
pub mod stats;
pub mod time;
pub mod timing;
pub mod ust;
