use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(PersonId, "p");
id_type!(HouseholdId, "h");
id_type!(DwellingId, "d");
id_type!(FirmId, "f");
id_type!(LoanId, "l");
id_type!(
    /// Index into `World::regions`.
    RegionId,
    "r"
);
id_type!(
    /// Index into `World::municipalities`.
    MunicipalityId,
    "m"
);

/// Monotone id allocators. Ids are never reused within a run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IdCounters {
    pub person: u32,
    pub household: u32,
    pub dwelling: u32,
    pub firm: u32,
    pub loan: u32,
}

impl IdCounters {
    pub fn person(&mut self) -> PersonId {
        self.person += 1;
        PersonId(self.person - 1)
    }
    pub fn household(&mut self) -> HouseholdId {
        self.household += 1;
        HouseholdId(self.household - 1)
    }
    pub fn dwelling(&mut self) -> DwellingId {
        self.dwelling += 1;
        DwellingId(self.dwelling - 1)
    }
    pub fn firm(&mut self) -> FirmId {
        self.firm += 1;
        FirmId(self.firm - 1)
    }
    pub fn loan(&mut self) -> LoanId {
        self.loan += 1;
        LoanId(self.loan - 1)
    }
}
