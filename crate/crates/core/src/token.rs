use std::fmt;

/// A string token did not name any variant of the expected enum.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{token}`")]
pub struct ParseTokenError {
    pub kind: &'static str,
    pub token: String,
}

impl ParseTokenError {
    pub(crate) fn new(kind: &'static str, token: impl fmt::Display) -> Self {
        Self {
            kind,
            token: token.to_string(),
        }
    }
}

/// Gives a fieldless enum a fixed wire token per variant, plus `ALL`,
/// `Display` and `FromStr`.
macro_rules! token_enum {
    ($ty:ident, $what:literal { $($var:ident => $tok:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$var),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$var => $tok),+
                }
            }
        }

        impl ::std::fmt::Display for $ty {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $ty {
            type Err = $crate::token::ParseTokenError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($tok => Ok($ty::$var),)+
                    other => Err($crate::token::ParseTokenError::new($what, other)),
                }
            }
        }
    };
}

pub(crate) use token_enum;
