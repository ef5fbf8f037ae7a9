//! Benchmark fixtures shared by the criterion targets.

use rmp_core::channel::{broadcasting_instance, ChannelRmpInstance};
use rmp_core::instances::{monogamy_instance, w_instance};
use rmp_core::RmpInstance;

pub struct Fixtures {
    pub w: RmpInstance,
    pub monogamy: RmpInstance,
    pub broadcasting: ChannelRmpInstance,
}

impl Fixtures {
    pub fn load() -> Self {
        Self {
            w: w_instance().expect("W instance"),
            monogamy: monogamy_instance().expect("monogamy instance"),
            broadcasting: broadcasting_instance().expect("broadcasting instance"),
        }
    }
}
