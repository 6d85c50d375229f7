//! State-aware data randomization for 3D TLC/QLC NAND flash.
//!
//! The crate models flash cells at the discrete-state level, injects
//! retention errors driven by lateral charge spreading between vertically
//! adjacent cells, and implements three write-path randomizers: a plain LFSR
//! scrambler, a TailCut-style pattern breaker and STAR, which flips page bits
//! per 128-cell group to steer data away from error-prone states.
//!
//! Around that core sit a cycle-level datapath model, a trace-driven SSD
//! emulator with a read-retry model, and experiment runners that tie the
//! pieces together.

pub mod calibrate;
pub mod error;
pub mod experiments;
pub mod gray;
pub mod nand;
pub mod pipeline;
pub mod profile;
pub mod randomizer;
pub mod ssd;
mod util;

pub use error::{Error, Result};
pub use gray::{CellState, CellType, GrayCodeMap};
pub use nand::{BlockAddr, FlashArray, Geometry, WlAddr};
pub use profile::{build_delta_lut, load_profile, DeltaLut, ErrorProfile};
pub use randomizer::Mode;
