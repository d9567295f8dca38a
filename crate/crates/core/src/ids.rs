use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Position of an image in the collection, `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(pub u32);

impl ImageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl From<u32> for ImageId {
    fn from(v: u32) -> Self {
        ImageId(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BucketId(pub u32);

impl fmt::Display for BucketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bucket {}", self.0)
    }
}

/// Where an image can be placed: a user bucket or the discard pile.
///
/// Serialized as the bare bucket number, or the string `"discard"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Bucket(BucketId),
    Discard,
}

impl Target {
    pub fn bucket(self) -> Option<BucketId> {
        match self {
            Target::Bucket(b) => Some(b),
            Target::Discard => None,
        }
    }
}

impl From<BucketId> for Target {
    fn from(b: BucketId) -> Self {
        Target::Bucket(b)
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Bucket(b) => b.fmt(f),
            Target::Discard => f.write_str("the discard pile"),
        }
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Target::Bucket(b) => s.serialize_u32(b.0),
            Target::Discard => s.serialize_str("discard"),
        }
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct TargetVisitor;

        impl Visitor<'_> for TargetVisitor {
            type Value = Target;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a bucket number or \"discard\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Target, E> {
                u32::try_from(v)
                    .map(|v| Target::Bucket(BucketId(v)))
                    .map_err(|_| E::custom("bucket id out of range"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Target, E> {
                u32::try_from(v)
                    .map(|v| Target::Bucket(BucketId(v)))
                    .map_err(|_| E::custom("bucket id out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Target, E> {
                match v {
                    "discard" | "d" => Ok(Target::Discard),
                    other => other
                        .parse::<u32>()
                        .map(|v| Target::Bucket(BucketId(v)))
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        d.deserialize_any(TargetVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_json_forms() {
        assert_eq!(serde_json::to_string(&Target::Discard).unwrap(), "\"discard\"");
        assert_eq!(serde_json::to_string(&Target::Bucket(BucketId(3))).unwrap(), "3");
        let t: Target = serde_json::from_str("7").unwrap();
        assert_eq!(t, Target::Bucket(BucketId(7)));
        let t: Target = serde_json::from_str("\"discard\"").unwrap();
        assert_eq!(t, Target::Discard);
        assert!(serde_json::from_str::<Target>("\"bin\"").is_err());
    }
}
