pub mod channel;
pub mod conv;
pub mod elementwise;
pub mod shape;
