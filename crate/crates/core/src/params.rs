//! Macro for parameter structs that exist in every [`ParamKind`].

/// Declares a struct generic over [`ParamKind`](crate::backend::ParamKind)
/// whose fields are each a `Weight`, `Param` or `Embedding`, along with
/// `try_map` (convert every field to another kind) and `visit` (walk fields
/// with their dotted names) in declaration order.
macro_rules! define_params {
    (
        $(#[$meta:meta])*
        pub struct $name:ident {
            $( $(#[$fmeta:meta])* $field:ident : $role:ident ),* $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone)]
        pub struct $name<K: $crate::backend::ParamKind = $crate::backend::Float> {
            $( $(#[$fmeta])* pub $field: <K as $crate::backend::ParamKind>::$role, )*
        }

        impl<K: $crate::backend::ParamKind> $name<K> {
            pub fn try_map<B, M>(&self, prefix: &str, map: &mut M) -> $crate::error::Result<$name<B>>
            where
                B: $crate::backend::ParamKind,
                M: $crate::backend::ParamMap<K, B>,
            {
                Ok($name {
                    $( $field: define_params!(@map $role, map, &format!("{prefix}{}", stringify!($field)), &self.$field)?, )*
                })
            }

            pub fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, $crate::backend::Slot<'_, K>)) {
                $( f(&format!("{prefix}{}", stringify!($field)), $crate::backend::Slot::$role(&self.$field)); )*
            }
        }

        impl $name<$crate::backend::Float> {
            pub fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut $crate::tensor::Tensor)) {
                $( f(&format!("{prefix}{}", stringify!($field)), &mut self.$field); )*
            }
        }
    };
    (@map Weight, $m:expr, $n:expr, $v:expr) => { $m.weight($n, $v) };
    (@map Param, $m:expr, $n:expr, $v:expr) => { $m.param($n, $v) };
    (@map Embedding, $m:expr, $n:expr, $v:expr) => { $m.embedding($n, $v) };
}

pub(crate) use define_params;
