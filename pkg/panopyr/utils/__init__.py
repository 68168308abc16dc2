from panopyr.utils.utils import filter_kwargs, parse_size, parse_id_list, parse_flags
