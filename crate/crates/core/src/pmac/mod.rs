//! The coordination-based MAC protocol.
//!
//! Each 100 ms frame opens with seven scheduling slots (one per cell group,
//! rotating every frame), followed by contention-free data slots and a
//! trailing block of contention slots. Coordinators broadcast scheduling
//! packets that commit contention-free transmissions protected by reserved
//! discs around the receivers, relay and police their neighbors'
//! reservations, and announce where new transmission requests may contend.

mod access;
mod schedule;
mod wake;

pub use access::{contention_access, Contender, ContentionOutcome};
pub use schedule::{
    CoordinatorState, DemandEntry, Disc, IngestReport, Reservation, ReservationKey,
    ScheduleContext, SchedulingPacket,
};
pub use wake::node_wake_plan;

use crate::geometry::NUM_GROUPS;

/// Slot structure of one frame. Scheduling slots occupy the first `k`
/// positions; contention slots are the trailing block (the same frame slots
/// in every cell, so adjacent coordinators mark identical contention slots);
/// everything in between is contention-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    pub slots_per_frame: usize,
    pub slot_us: u64,
    /// Number of scheduling slots (equals the number of cell groups).
    pub k: usize,
    /// Number of trailing contention slots announced for the frame.
    pub num_contention: usize,
}

impl FrameLayout {
    /// 100 slots of 1 ms: 7 scheduling, 2 contention, 91 contention-free.
    pub fn standard() -> Self {
        Self {
            slots_per_frame: 100,
            slot_us: 1000,
            k: NUM_GROUPS,
            num_contention: 2,
        }
    }

    pub fn frame_us(&self) -> u64 {
        self.slots_per_frame as u64 * self.slot_us
    }

    pub fn contention_free_slots(&self) -> std::ops::Range<usize> {
        self.k..self.slots_per_frame - self.num_contention
    }

    pub fn contention_slots(&self) -> std::ops::Range<usize> {
        self.slots_per_frame - self.num_contention..self.slots_per_frame
    }

    pub fn validate(&self) -> bool {
        self.k + self.num_contention <= self.slots_per_frame && self.slot_us > 0
    }

    /// With a different number of contention slots (dynamic adjustment).
    pub fn with_contention(&self, num_contention: usize) -> Self {
        Self {
            num_contention,
            ..self.clone()
        }
    }
}

/// Scheduling slot (1-based, in `1..=k`) assigned to a cell group in a given
/// frame: `((group + frame) mod k) + 1`. For any frame the map from group to
/// slot is a bijection, and over `k` consecutive frames every group visits
/// every slot exactly once.
pub fn scheduling_slot_for_frame(group: u8, frame: u64, k: usize) -> usize {
    assert!((group as usize) < k, "group {group} out of range for k={k}");
    ((group as u64 + frame) % k as u64) as usize + 1
}
